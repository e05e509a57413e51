fn main() {
    std::process::exit(ambc_harness::cli::run(std::env::args().collect()));
}
