use clap::Parser;

use listtune::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
        let code = if e.class() == "usage" { 2 } else { 1 };
        std::process::exit(code);
    }
}
