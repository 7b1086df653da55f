fn main() {
    std::process::exit(hyperrigid_cli::run(std::env::args_os()));
}
