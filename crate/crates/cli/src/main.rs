fn main() {
    std::process::exit(target_pricing_cli::run(std::env::args_os()));
}
