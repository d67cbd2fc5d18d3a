fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRECIP_UQ_LOG", "warn")).init();
    std::process::exit(precip_uq::cli::run(std::env::args_os()));
}
