fn main() {
    std::process::exit(dunnett_ctp::cli::run_from_args(std::env::args_os()));
}
