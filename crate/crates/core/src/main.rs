use std::process::ExitCode;

fn main() -> ExitCode {
    gvc::cli::init_logging();
    ExitCode::from(gvc::cli::run(std::env::args_os()))
}
