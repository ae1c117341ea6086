fn main() {
    std::process::exit(linfa_cli::run(std::env::args_os()));
}
