fn main() {
    std::process::exit(bincomp::cli::run(std::env::args_os()));
}
