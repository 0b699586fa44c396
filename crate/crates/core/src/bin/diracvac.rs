fn main() {
    std::process::exit(dirac_vacuum::cli::run(std::env::args().collect()));
}
