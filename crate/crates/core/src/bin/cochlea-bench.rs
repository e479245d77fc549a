fn main() {
    std::process::exit(cochlea_core::cli::main_with_args(std::env::args_os()));
}
