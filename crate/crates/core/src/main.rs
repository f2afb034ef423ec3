fn main() {
    std::process::exit(phs_kit::cli::run(std::env::args_os()));
}
