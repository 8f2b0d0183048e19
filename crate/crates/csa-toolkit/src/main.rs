use std::process::ExitCode;

fn main() -> ExitCode {
    csa_toolkit::cli::run()
}
