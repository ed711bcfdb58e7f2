fn main() {
    std::process::exit(metastab_cli::main_with_args(std::env::args_os()));
}
