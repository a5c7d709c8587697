fn main() {
    let _ = env_logger::try_init();
    std::process::exit(chorus::cli::run(std::env::args_os()));
}
