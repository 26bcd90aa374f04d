fn main() {
    let code = pspower::cli::run(std::env::args().collect());
    std::process::exit(code);
}
