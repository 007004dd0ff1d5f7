use clap::Parser;

fn main() {
    let args = synthwave::cli::Args::parse();
    std::process::exit(synthwave::cli::main_with(args));
}
