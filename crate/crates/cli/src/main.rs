use clap::Parser;

fn main() {
    let cli = match tscnn_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { tscnn_cli::EXIT_INPUT } else { tscnn_cli::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = tscnn_cli::run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
