fn main() {
    env_logger::init();
    std::process::exit(fcgo::cli_io::run_command(std::env::args_os()));
}
