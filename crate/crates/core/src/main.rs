fn main() {
    std::process::exit(pgplan::cli::run(std::env::args()));
}
