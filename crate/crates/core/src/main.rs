fn main() {
    std::process::exit(structprior::cli::run(std::env::args_os()));
}
