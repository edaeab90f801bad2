mod args;
mod commands;
mod error;

use clap::Parser;

use args::{merge_config, read_config, Cli, Command};
use error::CliError;

fn parse(argv: Vec<String>) -> Result<Cli, CliError> {
    // The config path has to be known before clap runs.
    let config = argv
        .iter()
        .position(|a| a == "--config")
        .and_then(|i| argv.get(i + 1).cloned())
        .or_else(|| argv.iter().find_map(|a| a.strip_prefix("--config=").map(String::from)));
    let argv = match config {
        Some(path) => {
            let path = std::path::PathBuf::from(path);
            if !path.is_file() {
                return Err(CliError::missing_file(&path));
            }
            let entries = read_config(&path).map_err(|m| CliError::usage("config", m))?;
            merge_config(&argv, &entries).map_err(|m| CliError::usage("config", m))?
        }
        None => argv,
    };
    Cli::try_parse_from(argv).map_err(|e| {
        if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::from_clap(&e)
    })
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("invalid-value", "--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage("usage", e.to_string()))?;
    }
    match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Bound(a) => commands::bound(a),
        Command::Corrupt(a) => commands::corrupt(a),
        Command::Roc(a) => commands::roc(a),
        Command::Stats(a) => commands::stats(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = parse(std::env::args().collect()).and_then(dispatch);
    if let Err(e) = result {
        eprintln!("{}", e.line());
        std::process::exit(e.exit);
    }
}
