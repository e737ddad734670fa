fn main() {
    std::process::exit(concap::cli::run(std::env::args_os()));
}
