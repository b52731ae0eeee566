fn main() {
    let code = almgren_cli::run(std::env::args_os());
    std::process::exit(code);
}
