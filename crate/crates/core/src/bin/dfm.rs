fn main() {
    std::process::exit(dfm::cli::main_with_args(std::env::args_os()));
}
