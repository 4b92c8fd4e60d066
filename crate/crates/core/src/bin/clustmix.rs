fn main() {
    std::process::exit(clustmix::cli::main());
}
