fn main() {
    std::process::exit(affnet::cli::run(std::env::args()));
}
