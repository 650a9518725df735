fn main() {
    std::process::exit(allocsim::cli::run(std::env::args_os()));
}
