use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use telemonitor::api::{self, Account, Accounts, ApiSettings, ApiState};
use telemonitor::config::Config;
use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::{extract_invite_links, Pseudonymizer};
use telemonitor::{pipeline, Error};

#[derive(Parser)]
#[command(name = "monitor", version, about = "Telegram group monitoring pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse chat exports into a dataset.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Fingerprint and cluster a dataset.
    Process {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the distinct group invite links found in text files.
    ScanLinks {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        bind: Option<SocketAddr>,
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic corpus with a ground truth manifest.
    GenFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        messages: usize,
    },
    /// Add or replace an analyst account. The password is read from stdin.
    AddAccount {
        #[arg(long)]
        accounts: PathBuf,
        #[arg(long)]
        username: String,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn print_json(value: &impl serde::Serialize) -> telemonitor::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> telemonitor::Result<()> {
    match command {
        Command::Ingest { input, dataset, config } => {
            let config = Config::load(&config)?;
            let pseudonymizer = Pseudonymizer::new(&config.secret()?)?;
            print_json(&pipeline::ingest_dir(&input, &dataset, &pseudonymizer)?)
        }
        Command::Process { dataset, config } => {
            let config = Config::load(&config)?;
            print_json(&pipeline::process_dataset(&dataset, &config.thresholds)?)
        }
        Command::ScanLinks { input } => {
            let mut seen = BTreeSet::new();
            for path in &input {
                let text = read_text(path)?;
                for link in extract_invite_links(&text) {
                    if seen.insert(link.url.clone()) {
                        println!("{}", link.url);
                    }
                }
            }
            Ok(())
        }
        Command::Serve { dataset, bind, config } => serve(&dataset, bind, &Config::load(&config)?),
        Command::GenFixture { out, seed, messages } => {
            let manifest = fixture::generate(&out, &FixtureOptions::new(seed, messages))?;
            print_json(&manifest.expected_clusters)
        }
        Command::AddAccount { accounts, username } => {
            let mut password = String::new();
            std::io::stdin()
                .read_line(&mut password)
                .map_err(|e| Error::Config(format!("reading password: {e}")))?;
            let password = password.trim_end_matches(['\r', '\n']);
            let mut list: Vec<Account> = if accounts.exists() {
                serde_json::from_slice(&std::fs::read(&accounts).map_err(|e| io_error(&accounts, e))?)?
            } else {
                Vec::new()
            };
            list.retain(|a| a.username != username);
            list.push(Account::new(&username, password)?);
            let mut body = serde_json::to_vec_pretty(&list)?;
            body.push(b'\n');
            std::fs::write(&accounts, body).map_err(|e| io_error(&accounts, e))
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> telemonitor::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn serve(dataset: &Path, bind: Option<SocketAddr>, config: &Config) -> telemonitor::Result<()> {
    let addr = match bind {
        Some(a) => a,
        None => config
            .api
            .bind
            .parse()
            .map_err(|e| Error::Config(format!("api.bind {:?}: {e}", config.api.bind)))?,
    };
    let accounts = match config.accounts_path() {
        Some(p) => Accounts::load(&p)?,
        None => Accounts::default(),
    };
    if accounts.is_empty() {
        tracing::warn!("no analyst accounts configured; every login will fail");
    }
    let settings = ApiSettings {
        token_ttl: std::time::Duration::from_secs(config.api.token_ttl_secs),
        cors_origin: config.api.cors_origin.clone(),
        public_base_url: config.public_base_url(),
    };
    let state = Arc::new(ApiState::open(dataset, accounts, settings)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Config(e.to_string()))?;
    runtime
        .block_on(api::serve(state, addr))
        .map_err(|e| Error::Config(format!("serving on {addr}: {e}")))
}
