fn main() {
    std::process::exit(stability_workbench::cli::main_with_args(std::env::args_os()));
}
