use clap::Parser;
use lurepwa_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("lurepwa: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
