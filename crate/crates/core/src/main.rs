fn main() {
    std::process::exit(genkant::cli::run(std::env::args_os()));
}
