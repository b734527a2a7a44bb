fn main() {
    std::process::exit(radcode::cli::run(std::env::args_os()));
}
