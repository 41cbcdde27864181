fn main() {
    std::process::exit(halfspace::cli::run(std::env::args_os()));
}
