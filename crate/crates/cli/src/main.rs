use std::process::ExitCode;

fn main() -> ExitCode {
    netmarket_cli::main_with(std::env::args_os())
}
