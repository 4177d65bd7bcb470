fn main() {
    std::process::exit(hfield::cli::main_with_args(std::env::args_os()));
}
