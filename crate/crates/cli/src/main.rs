fn main() {
    std::process::exit(domcalc_cli::run_cli(std::env::args_os()));
}
