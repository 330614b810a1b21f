fn main() {
    std::process::exit(smilansky_lab::cli::main());
}
