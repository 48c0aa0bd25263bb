fn main() {
    std::process::exit(envsense_cli::main_with_args(std::env::args_os().skip(1)));
}
