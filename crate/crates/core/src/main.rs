fn main() {
    std::process::exit(frio::cli::main_with_args(std::env::args_os()));
}
