fn main() {
    std::process::exit(statedelay::cli::main_with_args(std::env::args_os()));
}
