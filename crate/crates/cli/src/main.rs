fn main() {
    std::process::exit(unirep_cli::run(std::env::args_os()));
}
