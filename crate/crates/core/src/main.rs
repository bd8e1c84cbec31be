fn main() {
    std::process::exit(pathflow::cli::main_entry());
}
