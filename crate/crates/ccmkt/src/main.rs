fn main() {
    std::process::exit(ccmkt::cli::main_with_args(std::env::args_os()));
}
