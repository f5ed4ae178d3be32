fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAXDYN_LOG", "warn")).init();
    std::process::exit(laxdyn::cli::run(std::env::args_os()));
}
