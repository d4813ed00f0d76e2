fn main() {
    std::process::exit(search_contracts_cli::run(std::env::args_os()));
}
