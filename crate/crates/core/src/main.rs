fn main() {
    std::process::exit(platoon::cli::run(std::env::args_os()));
}
