fn main() {
    std::process::exit(lslr_cli::run());
}
