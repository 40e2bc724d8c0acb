fn main() {
    std::process::exit(recom_core::cli::main_with_args(std::env::args_os()));
}
