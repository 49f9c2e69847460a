use std::process::ExitCode;

fn main() -> ExitCode {
    oma::cli::main_entry()
}
