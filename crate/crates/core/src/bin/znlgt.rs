fn main() {
    std::process::exit(znlgt::cli::run(std::env::args_os()));
}
