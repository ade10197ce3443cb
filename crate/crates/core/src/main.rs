fn main() {
    std::process::exit(graphssl::cli::run_cli(std::env::args_os()));
}
