fn main() {
    std::process::exit(qkdsim_cli::main_with(std::env::args_os()));
}
