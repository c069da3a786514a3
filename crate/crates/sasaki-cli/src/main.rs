use clap::Parser;

fn main() {
    let cli = sasaki_cli::Cli::parse();
    match sasaki_cli::run(&cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    }
}
