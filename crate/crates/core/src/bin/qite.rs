fn main() {
    std::process::exit(qite_pricing::cli::run(std::env::args_os()));
}
