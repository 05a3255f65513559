fn main() {
    std::process::exit(crgsolve_cli::run_cli(std::env::args_os()));
}
