//! Command line: chat, eval, serve, schema.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use interplan::eval::{run_suite, Suite};
use interplan::guidelines::TaskFamily;
use interplan::llm::{OracleProvider, Provider, RemoteConfig, RemoteProvider, DEFAULT_API_KEY_ENV};
use interplan::orchestrator::Session;
use interplan::pack::TaskPack;
use interplan::skills::{schema_document, SkillRegistry};
use interplan::transcript::{write_jsonl, SessionEvent, SessionState, TranscriptRecord};

use crate::config::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "interplan", version, about = "Interactive task planning for a simulated kitchen robot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order interactively; lines typed while the robot works are interrupts.
    Chat(ChatArgs),
    /// Run a benchmark suite and print its report.
    Eval(EvalArgs),
    /// Start the HTTP session service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the function schemas of a domain.
    Schema {
        #[arg(long, value_parser = parse_domain)]
        domain: TaskFamily,
        /// Skill file to use instead of the builtin one.
        #[arg(long)]
        skills: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Oracle,
    Remote,
}

/// Remote endpoint settings. The key itself is only read from the
/// environment variable named by `--api-key-env`.
#[derive(Debug, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    pub provider: ProviderChoice,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
}

impl ProviderArgs {
    fn build(&self, pack: &TaskPack) -> anyhow::Result<Arc<dyn Provider>> {
        Ok(match self.provider {
            ProviderChoice::Oracle => Arc::new(OracleProvider::new(pack.lexicon.clone())),
            ProviderChoice::Remote => {
                let (Some(endpoint), Some(model)) = (&self.endpoint, &self.model) else {
                    bail!("--provider remote needs --endpoint and --model");
                };
                Arc::new(RemoteProvider::new(RemoteConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    api_key_env: self.api_key_env.clone(),
                    timeout_secs: 60,
                })?)
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long, value_parser = parse_domain, default_value = "drink")]
    pub domain: TaskFamily,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pause between steps, leaving time to type an interrupt.
    #[arg(long, default_value_t = 400)]
    pub step_delay_ms: u64,
    /// Write the session transcript here as JSON lines.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_parser = ["drinks", "replan", "dishwash"])]
    pub suite: String,
    /// Suite file to use instead of the builtin one.
    #[arg(long)]
    pub suite_file: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Run cases on separate threads.
    #[arg(long)]
    pub parallel: bool,
}

fn parse_domain(s: &str) -> Result<TaskFamily, String> {
    s.parse()
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

pub fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Chat(args) => chat(args),
        Command::Eval(args) => eval(args),
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            tokio::runtime::Runtime::new()?.block_on(crate::service::serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Schema { domain, skills } => {
            let registry = match skills {
                Some(path) => SkillRegistry::from_path(&path)?,
                None => SkillRegistry::builtin(domain),
            };
            if registry.domain() != domain {
                bail!("skill file is for {}, not {domain}", registry.domain());
            }
            let doc = schema_document(&registry.schemas());
            match writeln!(std::io::stdout(), "{doc}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(ExitCode::SUCCESS),
            }
        }
    }
}

fn eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let suite = match &args.suite_file {
        Some(path) => Suite::from_path(path)?,
        None => Suite::builtin(&args.suite)?,
    };
    let pack = TaskPack::builtin(suite.domain);
    let provider = args.provider.build(&pack)?;
    let report = run_suite(&suite, &pack, provider, args.parallel);
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    // Live-provider runs are informational only.
    let gating = args.provider.provider == ProviderChoice::Oracle;
    Ok(if report.all_passed || !gating {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// One human-readable line (or block) per transcript record.
pub fn render_record(record: &TranscriptRecord) -> String {
    let numbered = |steps: &[String], from: usize| {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("  {}) {s}", from + i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    };
    match &record.event {
        SessionEvent::Request { text, .. } => format!("request: {text}"),
        SessionEvent::Planned { steps, .. } => format!("plan:\n{}", numbered(steps, 0)),
        SessionEvent::Refused { message, .. } => format!("refused: {message}"),
        SessionEvent::Interrupt { text, superseded } => {
            let tail = if *superseded { " (superseded)" } else { "" };
            format!("interrupt: {text}{tail}")
        }
        SessionEvent::Replanned { boundary, steps, .. } => {
            format!("replanned after {boundary} completed steps:\n{}", numbered(steps, *boundary))
        }
        SessionEvent::StepStarted { index, text } => format!("step {index}: {text}"),
        SessionEvent::Invocation { invocation, .. } => format!("    call {}", invocation.signature()),
        SessionEvent::Outcome { outcome, .. } => format!("    -> {}", outcome.observation),
        SessionEvent::StepCompleted { index, .. } => format!("step {index} done"),
        SessionEvent::Completed => "completed".to_string(),
        SessionEvent::Failed { reason, .. } => format!("failed: {reason}"),
    }
}

fn chat(args: ChatArgs) -> anyhow::Result<ExitCode> {
    let pack = TaskPack::builtin(args.domain);
    let provider = args.provider.build(&pack)?;
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    eprint!("request> ");
    std::io::stderr().flush().ok();
    let request = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => bail!("no request given on standard input"),
        }
    };
    drop(lines);

    let mut session = Session::new("chat", pack, provider, args.seed).with_sink(|r| {
        let _ = writeln!(std::io::stdout(), "{}", render_record(r));
    });
    let queue = session.interrupt_queue();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines().map_while(Result::ok) {
            if !line.trim().is_empty() {
                queue.push(line);
            }
        }
    });

    session.submit_request(&request)?;
    while !session.state().is_terminal() {
        std::thread::sleep(Duration::from_millis(args.step_delay_ms));
        session.advance()?;
    }
    if let Some(path) = &args.transcript {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_jsonl(session.transcript(), std::io::BufWriter::new(file))?;
    }
    Ok(match session.state() {
        SessionState::Failed => ExitCode::FAILURE,
        _ => ExitCode::SUCCESS,
    })
}
