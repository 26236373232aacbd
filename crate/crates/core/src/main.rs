fn main() {
    std::process::exit(grasp_repertoire::cli::main_with_args(std::env::args_os()));
}
