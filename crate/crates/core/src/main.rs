fn main() {
    std::process::exit(active_eval::cli::main_with_args(std::env::args_os()));
}
