fn main() {
    std::process::exit(ovalwig::cli::run(std::env::args_os()));
}
