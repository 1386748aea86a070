fn main() {
    std::process::exit(mer::cli::run(std::env::args_os()));
}
