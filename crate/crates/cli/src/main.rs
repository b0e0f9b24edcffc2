fn main() {
    std::process::exit(hsinv_cli::run_subcommand(std::env::args_os()));
}
