fn main() {
    std::process::exit(bansum::cli::run_cli(std::env::args_os()));
}
