fn main() {
    std::process::exit(primecvd_cli::run(std::env::args_os()));
}
