use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(recurrex::cli::run(std::env::args_os()))
}
