fn main() {
    env_logger::init();
    std::process::exit(genbound::cli::run(std::env::args_os()));
}
