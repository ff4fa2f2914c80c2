fn main() {
    std::process::exit(morrey::cli::run(std::env::args_os()));
}
