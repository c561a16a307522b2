use std::process::ExitCode;

use rotsqueeze::{cli, Error};

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", cli::error_json(e));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Error::Config(e.to_string())),
    };
    match cli::run_matches(&matches) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("serializable summary")
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
