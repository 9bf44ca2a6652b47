use clap::Parser;
use reliance::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RELIANCE_LOG", "warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        if let reliance::CliError::Validation(report) = &e {
            for issue in &report.errors {
                eprintln!("  {issue}");
            }
        }
        std::process::exit(e.exit_code());
    }
}
