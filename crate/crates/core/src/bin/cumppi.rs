fn main() {
    std::process::exit(cumppi::cli::run(std::env::args_os()));
}
