use clap::Parser;
use robosetup::cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        match &e.element {
            Some(el) => eprintln!("error: {e} [{el}]"),
            None => eprintln!("error: {e}"),
        }
        std::process::exit(e.exit_code());
    }
}
