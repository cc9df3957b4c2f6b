use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mlp_logdet_cli::run(std::env::args_os()))
}
