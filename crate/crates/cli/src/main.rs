fn main() {
    std::process::exit(impact_cli::run(std::env::args_os()));
}
