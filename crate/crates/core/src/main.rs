fn main() {
    std::process::exit(billiard_lab::cli::run(std::env::args_os()));
}
