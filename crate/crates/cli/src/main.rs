fn main() {
    if let Err(e) = cprdraft::run(std::env::args_os()) {
        eprintln!("cprdraft: {e}");
        std::process::exit(e.exit_code());
    }
}
