fn main() {
    std::process::exit(adamant::cli::main_with_args(std::env::args_os()));
}
