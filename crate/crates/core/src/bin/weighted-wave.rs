fn main() {
    std::process::exit(weighted_wave::cli::main_with_args(std::env::args_os()));
}
