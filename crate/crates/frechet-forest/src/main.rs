fn main() {
    std::process::exit(frechet_forest::cli::run());
}
