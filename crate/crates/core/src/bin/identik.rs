fn main() {
    std::process::exit(identik::cli::main_with_args(std::env::args_os()));
}
