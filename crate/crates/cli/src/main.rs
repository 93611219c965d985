fn main() {
    std::process::exit(btcxr_cli::run(std::env::args_os()));
}
