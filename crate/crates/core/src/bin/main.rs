fn main() {
    std::process::exit(scdt_nls::cli::main_with_args(std::env::args_os()));
}
