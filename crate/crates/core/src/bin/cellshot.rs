fn main() {
    std::process::exit(cellshot::cli::run());
}
