fn main() {
    std::process::exit(flipopt::cli::run(std::env::args_os()));
}
