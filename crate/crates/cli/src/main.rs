fn main() {
    std::process::exit(mshe_cli::run_command(std::env::args_os()));
}
