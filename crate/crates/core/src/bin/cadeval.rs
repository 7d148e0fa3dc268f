fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let code = std::panic::catch_unwind(|| cadeval::cli::run(&argv)).unwrap_or(1);
    std::process::exit(code);
}
