fn main() {
    std::process::exit(eigenprism::cli::run_cli(std::env::args_os()));
}
