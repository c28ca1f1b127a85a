fn main() {
    std::process::exit(goalfem_cli::main_with_args(std::env::args_os()));
}
