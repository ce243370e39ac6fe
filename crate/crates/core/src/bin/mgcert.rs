use clap::Parser;

fn main() {
    let args = mgcert::cli::Args::parse();
    match mgcert::cli::run(&args) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            std::process::exit(1);
        }
    }
}
