fn main() {
    std::process::exit(invberge_cli::run_command(std::env::args_os()));
}
