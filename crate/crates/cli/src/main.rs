mod repl;
mod replay;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use mawen_core::knowledge::{load_store, KnowledgeStore};
use mawen_core::par::Exec;
use mawen_core::term::{parse, render_linear, render_pretty, NotationTable, Signature};
use mawen_server::Server;

#[derive(Parser)]
#[command(name = "mawen", version, about = "Mathematics working environment: knowledge checks, transcripts, sessions")]
struct Cli {
    /// Knowledge directory (theories/, problems/, methods/, examples/).
    #[arg(long, global = true, env = "MAWEN_KNOWLEDGE_DIR", default_value = "corpus")]
    knowledge: PathBuf,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a knowledge directory.
    Check { dir: PathBuf },
    /// Replay a JSONL transcript and compare every response.
    Replay {
        transcript: PathBuf,
        /// Rewrite the expected responses instead of comparing.
        #[arg(long)]
        update: bool,
    },
    /// Line-oriented interactive session (plain ASCII, one fact per line).
    Repl {
        #[arg(long)]
        example: Option<String>,
    },
    /// Run the protocol server.
    Serve {
        #[arg(long, conflicts_with = "port")]
        stdio: bool,
        /// WebSocket port on 127.0.0.1 (0 picks a free one).
        #[arg(long)]
        port: Option<u16>,
    },
    /// Render one term.
    Render {
        term: String,
        #[arg(long, conflicts_with = "pretty")]
        linear: bool,
        #[arg(long)]
        pretty: bool,
    },
}

fn load(dir: &PathBuf) -> Result<KnowledgeStore, ExitCode> {
    load_store(dir).map_err(|report| {
        for e in &report.errors {
            eprintln!("{e}");
        }
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let run = || -> Result<(), ExitCode> {
        match cli.command {
            Command::Check { dir } => {
                let s = load(&dir)?;
                println!(
                    "ok: {} theories, {} problems, {} methods, {} examples",
                    s.theories().count(),
                    s.all_problems().len(),
                    s.all_methods().len(),
                    s.examples().count()
                );
            }
            Command::Replay { transcript, update } => {
                let server = Server::new(load(&cli.knowledge)?, exec);
                replay::run(&server, &transcript, update)?;
            }
            Command::Repl { example } => {
                let server = Server::new(load(&cli.knowledge)?, exec);
                repl::run(&server, io::stdin().lock(), io::stdout().lock(), example.as_deref()).map_err(|e| {
                    eprintln!("{e}");
                    ExitCode::from(1)
                })?;
            }
            Command::Serve { stdio: _, port } => {
                let server = Server::new(load(&cli.knowledge)?, exec);
                let result = match port {
                    Some(p) => mawen_server::serve_websocket(Arc::new(server), p),
                    None => mawen_server::serve_stdio(&server, io::stdin().lock(), io::stdout().lock()),
                };
                result.map_err(|e| {
                    eprintln!("{e}");
                    ExitCode::from(1)
                })?;
            }
            Command::Render { term, linear: _, pretty } => {
                let t = parse(&term, &Signature::full()).map_err(|e| {
                    eprintln!("{term}\n{}^ {}", " ".repeat(e.position), e.message);
                    ExitCode::from(1)
                })?;
                let out = if pretty { render_pretty(&t) } else { render_linear(&t, NotationTable::default_table()) };
                println!("{}", out.map_err(|e| {
                    eprintln!("{e}");
                    ExitCode::from(1)
                })?);
            }
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
