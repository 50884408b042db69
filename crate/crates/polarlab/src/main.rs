fn main() {
    std::process::exit(polarlab::cli::run(std::env::args_os()));
}
