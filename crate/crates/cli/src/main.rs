fn main() {
    std::process::exit(scopula_cli::main_with_args(std::env::args_os()));
}
