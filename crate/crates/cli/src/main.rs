fn main() {
    std::process::exit(geq_cli::app::main_with(std::env::args_os()));
}
