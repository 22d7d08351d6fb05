use std::process::ExitCode;

use varimorph_cli::{parse_cli, run_pipeline};

fn main() -> ExitCode {
    let config = match parse_cli(std::env::args_os()) {
        Ok(c) => c,
        Err(Ok(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(Err(e)) => {
            eprintln!("{}", e.render());
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run_pipeline(&config) {
        Ok(manifest) => {
            eprintln!(
                "varimorph: wrote {} file(s) to {}",
                manifest.outputs.len(),
                config.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
