fn main() {
    std::process::exit(prclab::cli::main_with_args(std::env::args_os()));
}
