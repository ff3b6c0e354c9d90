fn main() {
    std::process::exit(mtad::cli::main_with_args(std::env::args_os()));
}
