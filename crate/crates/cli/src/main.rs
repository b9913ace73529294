use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let status = jetgeom_cli::main_with(&argv, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(status as u8)
}
