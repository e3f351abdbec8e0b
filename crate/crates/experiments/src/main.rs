use clap::Parser;

use dispcomp::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli, &mut std::io::stdout()) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("dispcomp: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
