fn main() {
    let env = vlx::cli::Env::from_process();
    let code = vlx::cli::run(std::env::args_os(), &env, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
