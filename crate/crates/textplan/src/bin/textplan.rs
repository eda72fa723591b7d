use std::process::ExitCode;

fn main() -> ExitCode {
    textplan::cli::run()
}
