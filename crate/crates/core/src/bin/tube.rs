fn main() {
    std::process::exit(tube::cli::main_with_args(std::env::args_os()));
}
