fn main() {
    std::process::exit(stlstm::cli::main_with_args(std::env::args_os()));
}
