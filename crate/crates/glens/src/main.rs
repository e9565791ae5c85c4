fn main() {
    std::process::exit(glens::cli::run(std::env::args_os()));
}
