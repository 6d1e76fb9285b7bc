fn main() {
    std::process::exit(ifire::cli::run_cli());
}
