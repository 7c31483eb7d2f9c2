fn main() {
    std::process::exit(carleman_cli::run(std::env::args_os()));
}
