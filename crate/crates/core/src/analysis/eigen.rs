//! Eigensystem of the linear drift matrix.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{drift_matrix, W0, W1};
use crate::error::Result;
use crate::model::ModelParams;

/// Relative tolerance for treating two eigenvalues as degenerate.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigensystem {
    /// Eigenvalues in physical units, descending.
    pub values: [f64; 4],
    /// Unit eigenvectors, `vectors[i]` belonging to `values[i]`.
    pub vectors: [[f64; 4]; 4],
    pub goldstone: usize,
    pub squeezed: usize,
    /// `|v . w0|` and `|v . w1|` of the identified eigenvectors.
    pub goldstone_overlap: f64,
    pub squeezed_overlap: f64,
}

impl Eigensystem {
    /// `{0, -2, -2(sigma - 1), -2 sigma}` times `gamma_s`, descending.
    pub fn expected_values(params: &ModelParams) -> [f64; 4] {
        let g = params.gamma_s;
        let s = params.sigma;
        let mut v = [0.0, -2.0 * g, -2.0 * g * (s - 1.0), -2.0 * g * s];
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

fn dot(a: &Vector4<f64>, b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Diagonalizes the drift matrix and identifies the Goldstone and squeezed
/// eigenvectors by maximal overlap. Inside a degenerate eigenspace the
/// reference vector is projected onto the space and the remaining basis is
/// re-orthonormalized around it.
pub fn eigensystem_l(params: &ModelParams) -> Result<Eigensystem> {
    params.validate()?;
    params.require_isotropic("eigensystem_l")?;
    params.require_above_threshold("eigensystem_l")?;
    let m = drift_matrix(params);
    let eig = SymmetricEigen::new(Matrix4::from_fn(|i, j| m[i][j]));

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors: Vec<Vector4<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));

    let mut assigned = [false; 4];
    let mut pick = |vectors: &mut Vec<Vector4<f64>>, target: &[f64; 4]| -> (usize, f64) {
        let best = (0..4)
            .filter(|&i| !assigned[i])
            .max_by(|&a, &b| {
                dot(&vectors[a], target)
                    .abs()
                    .total_cmp(&dot(&vectors[b], target).abs())
            })
            .expect("unassigned eigenvector");
        let cluster: Vec<usize> = (0..4)
            .filter(|&i| !assigned[i] && (values[i] - values[best]).abs() <= DEGENERACY_TOL * scale)
            .collect();
        let t = Vector4::from_column_slice(target);
        let mut projected = Vector4::zeros();
        for &i in &cluster {
            projected += vectors[i] * vectors[i].dot(&t);
        }
        let projected = projected.normalize();
        // Gram-Schmidt of the cluster starting from the projected reference
        let mut basis = vec![projected];
        for &i in &cluster {
            let mut v = vectors[i];
            for b in &basis {
                v -= b * b.dot(&v);
            }
            if v.norm() > 1e-6 && basis.len() < cluster.len() {
                basis.push(v.normalize());
            }
        }
        let mut slots = cluster.clone();
        slots.retain(|&i| i != best);
        vectors[best] = basis[0];
        for (slot, v) in slots.into_iter().zip(basis.into_iter().skip(1)) {
            vectors[slot] = v;
        }
        assigned[best] = true;
        (best, dot(&vectors[best], target).abs())
    };

    let (goldstone, goldstone_overlap) = pick(&mut vectors, &W0);
    let (squeezed, squeezed_overlap) = pick(&mut vectors, &W1);

    // sign convention: positive overlap with the reference vectors, otherwise
    // first nonzero component positive
    for (i, v) in vectors.iter_mut().enumerate() {
        let reference = if i == goldstone {
            dot(v, &W0)
        } else if i == squeezed {
            dot(v, &W1)
        } else {
            v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0)
        };
        if reference < 0.0 {
            *v = -*v;
        }
    }

    Ok(Eigensystem {
        values: [values[0], values[1], values[2], values[3]],
        vectors: std::array::from_fn(|i| {
            [vectors[i][0], vectors[i][1], vectors[i][2], vectors[i][3]]
        }),
        goldstone,
        squeezed,
        goldstone_overlap,
        squeezed_overlap,
    })
}
