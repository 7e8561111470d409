fn main() {
    std::process::exit(ckn_cli::main_with_args(std::env::args_os()));
}
