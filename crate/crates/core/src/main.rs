fn main() {
    std::process::exit(adgnn::cli::run(std::env::args_os()));
}
