fn main() {
    std::process::exit(dehaze::cli::main_with_args(std::env::args_os()));
}
