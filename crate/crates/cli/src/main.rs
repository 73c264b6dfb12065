fn main() {
    std::process::exit(dirint_cli::run());
}
