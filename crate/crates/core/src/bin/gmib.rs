fn main() {
    std::process::exit(gmib_engine::cli::run_command(std::env::args_os()));
}
