use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pide::config::Config;
use pide::harness::{self, Script, Session, EXIT_ASSERTION, EXIT_ERROR, EXIT_OK};

#[derive(Parser)]
#[command(name = "pide", version, about = "Prover IDE document kernel: scripted sessions, batch checks, back-end server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session script against a back-end.
    Run {
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Connect to a running `pide serve` instead of an in-process back-end.
        #[arg(long, value_name = "HOST:PORT")]
        socket: Option<String>,
        /// Write every protocol message to this file.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Shuffle the order of equally ranked tasks.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check theory files together and print the flattened markup.
    Batch {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        blobs: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Only markup produced by command evaluation.
        #[arg(long)]
        eval_only: bool,
    },
    /// Serve back-end connections on localhost.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, String> {
    match path {
        Some(p) => Config::load(p).map_err(|e| e.to_string()),
        None => Ok(Config::default()),
    }
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("pide: {msg}");
    EXIT_ERROR
}

fn run_script(script: &Path, config: Option<&Path>, socket: Option<&str>, trace: Option<&Path>, seed: Option<u64>) -> i32 {
    let mut config = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if seed.is_some() {
        config.seed = seed;
    }
    let text = match std::fs::read_to_string(script) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", script.display())),
    };
    let parsed = match Script::parse(&text) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", script.display())),
    };
    let session = match socket {
        Some(addr) => Session::connect(addr, &config),
        None => Session::in_process(&config),
    };
    let mut session = match session {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let stdout = io::stdout();
    let result = harness::run(&mut session, &parsed, &mut stdout.lock());
    let _ = stdout.lock().flush();
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(path, session.trace()) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pide: {}: {e}", script.display());
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { script, config, socket, trace, seed } => {
            run_script(&script, config.as_deref(), socket.as_deref(), trace.as_deref(), seed)
        }
        Command::Batch { files, blobs, config, eval_only } => match load_config(config.as_deref()) {
            Err(e) => fail(e),
            Ok(config) => match harness::batch_check(&files, blobs.as_deref(), &config, eval_only) {
                Ok(dump) => {
                    print!("{dump}");
                    EXIT_OK
                }
                Err(e) => fail(e),
            },
        },
        Command::Serve { port, config } => match load_config(config.as_deref()) {
            Err(e) => fail(e),
            Ok(config) => match TcpListener::bind(("127.0.0.1", port)) {
                Err(e) => fail(format!("cannot listen on port {port}: {e}")),
                Ok(listener) => {
                    log::info!("listening on {}", listener.local_addr().map_or(port.to_string(), |a| a.to_string()));
                    match harness::serve(listener, &config, None) {
                        Ok(()) => EXIT_OK,
                        Err(e) => fail(e),
                    }
                }
            },
        },
    };
    debug_assert!(code == EXIT_OK || code == EXIT_ASSERTION || code == EXIT_ERROR);
    ExitCode::from(code as u8)
}
