fn main() {
    std::process::exit(synthqa::cli::run(std::env::args_os()));
}
