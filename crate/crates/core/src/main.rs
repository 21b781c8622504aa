fn main() {
    std::process::exit(seganet::cli::run_cli(std::env::args_os()));
}
