fn main() {
    std::process::exit(nsl::cli::run(std::env::args_os()));
}
