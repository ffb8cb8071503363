use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout();
    ExitCode::from(underdog_core::cli::run(std::env::args(), &mut stdout))
}
