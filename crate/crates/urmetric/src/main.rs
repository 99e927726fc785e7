use std::process::ExitCode;

fn main() -> ExitCode {
    urmetric::cli::run()
}
