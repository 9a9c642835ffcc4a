fn main() {
    std::process::exit(cave_core::cli::main_with_args(std::env::args_os()));
}
