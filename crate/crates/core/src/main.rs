fn main() {
    std::process::exit(recur_core::cli::run(std::env::args_os()));
}
