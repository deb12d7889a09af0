use std::process::ExitCode;

fn main() -> ExitCode {
    nearfar::cli::main_with_args(std::env::args_os())
}
