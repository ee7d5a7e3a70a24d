fn main() {
    std::process::exit(peacelex_cli::run(std::env::args_os()));
}
