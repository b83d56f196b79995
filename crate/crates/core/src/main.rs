fn main() {
    std::process::exit(anxsense::cli::run(std::env::args_os()));
}
