fn main() {
    std::process::exit(churnforge::cli::run(std::env::args_os()));
}
