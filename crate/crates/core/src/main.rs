fn main() {
    std::process::exit(forager::cli::main_with(std::env::args_os()));
}
