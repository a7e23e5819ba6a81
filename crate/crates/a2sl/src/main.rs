fn main() {
    std::process::exit(a2sl::cli::main());
}
