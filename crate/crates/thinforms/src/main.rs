fn main() {
    std::process::exit(thinforms::cli::run_from_env());
}
