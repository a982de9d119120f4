fn main() {
    std::process::exit(unignn::cli::run(std::env::args_os()));
}
