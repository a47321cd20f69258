fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = mdl::engine::with_big_stack(move || {
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        mdl::cli::main_with(&args, &mut stdout.lock(), &mut stderr.lock())
    });
    std::process::exit(code);
}
