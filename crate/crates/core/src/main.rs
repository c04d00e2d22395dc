fn main() {
    std::process::exit(fairgap::cli::main_with_args(std::env::args_os()));
}
