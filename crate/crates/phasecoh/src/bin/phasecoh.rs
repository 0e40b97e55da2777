fn main() {
    std::process::exit(phasecoh::cli::run());
}
