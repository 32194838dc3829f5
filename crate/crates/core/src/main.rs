fn main() {
    std::process::exit(relaylab::cli::main_with_env());
}
