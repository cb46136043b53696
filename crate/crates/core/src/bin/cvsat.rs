fn main() {
    std::process::exit(cvqkd_saturation::cli::main());
}
