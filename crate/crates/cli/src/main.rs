fn main() {
    std::process::exit(hohmm_cli::run_cli(std::env::args_os()));
}
