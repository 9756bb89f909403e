use std::process::ExitCode;

fn main() -> ExitCode {
    speedcas::cli::main_with(std::env::args_os())
}
