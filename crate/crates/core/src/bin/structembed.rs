fn main() {
    std::process::exit(structembed::cli::main_from_env());
}
