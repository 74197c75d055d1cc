use std::process::ExitCode;

fn main() -> ExitCode {
    match stokes_ife::cli::main_entry(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().clamp(1, 255) as u8)
        }
    }
}
