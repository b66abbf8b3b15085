fn main() {
    std::process::exit(qndlab::cli::main_with_args(std::env::args_os()));
}
