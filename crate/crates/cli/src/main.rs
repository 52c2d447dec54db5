mod bridge;
mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Results directory used when `--out` is not given.
pub const RESULTS_ENV: &str = "ARENABENCH_RESULTS_DIR";

#[derive(Parser)]
#[command(name = "arenabench", version, about = "Arena benchmark for embodied language agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Action-script tools.
    Dsl {
        #[command(subcommand)]
        command: DslCommand,
    },
    /// Render one frame of a task to a PNG file.
    Render(RenderArgs),
    /// Run a suite of trials against an agent.
    Run(RunArgs),
    /// Accept agent connections and run the suite for each one.
    Serve(ServeArgs),
    /// Summarise trial records per level and population.
    Report(ReportArgs),
    /// Run a built-in agent as an external process.
    Agent(AgentArgs),
    /// Convert a task file from the external testbed format.
    Import(ImportArgs),
    /// Check task files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DslCommand {
    /// Parse a script and print its canonical form and motor plan.
    Check {
        /// Script file, or `-` for standard input.
        #[arg(default_value = "-")]
        file: String,
        /// Script text given inline instead of a file.
        #[arg(long)]
        text: Option<String>,
    },
}

#[derive(Args)]
struct RenderArgs {
    /// Bundled task id, `tutorial`, or a path to an `.arena` file.
    #[arg(long)]
    task: String,
    #[arg(long, default_value = "frame.png")]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    width: u32,
    #[arg(long, default_value_t = 512)]
    height: u32,
    /// Overhead view instead of the first-person view.
    #[arg(long)]
    topdown: bool,
    /// Script to play before rendering.
    #[arg(long)]
    script: Option<String>,
}

#[derive(Args, Clone)]
struct SuiteArgs {
    /// Suite configuration (TOML). Defaults to the 40-task suite.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// base | icl. Without --suite, `icl` also limits the run to levels 1-3.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per task.
    #[arg(long)]
    trials: Option<u32>,
    /// Comma-separated levels to keep.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<u8>,
    /// Comma-separated task ids to run.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Keep observation images in transcripts.
    #[arg(long)]
    transcript_images: bool,
    /// Output directory; falls back to $ARENABENCH_RESULTS_DIR, then `results`.
    #[arg(long, env = RESULTS_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// random | oracle | replay:<file> | mock:<file> | exec:<command> | tcp:<addr>
    #[arg(long, default_value = "oracle")]
    agent: String,
    /// Name recorded for external agents.
    #[arg(long)]
    agent_id: Option<String>,
    /// Trials run in parallel.
    #[arg(long)]
    concurrency: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Listen for agents on this TCP address.
    #[arg(long, conflicts_with_all = ["stdio", "http"])]
    bind: Option<String>,
    /// Serve one agent on standard input and output.
    #[arg(long)]
    stdio: bool,
    /// Serve the browser client and its socket bridge.
    #[arg(long, requires = "http")]
    human: bool,
    /// Address for the browser client, e.g. 127.0.0.1:8080.
    #[arg(long, requires = "human")]
    http: Option<String>,
    /// Directory of client assets to serve.
    #[arg(long)]
    assets: Option<PathBuf>,
    #[arg(long)]
    agent_id: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results directories or record files.
    #[arg(long = "in", required_unless_present = "baseline")]
    inputs: Vec<PathBuf>,
    /// External population records in the interchange CSV schema.
    #[arg(long)]
    baseline: Vec<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AgentArgs {
    /// random | replay:<file> | mock:<file>
    agent: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dial a harness at this address instead of using standard streams.
    #[arg(long)]
    connect: Option<String>,
}

#[derive(Args)]
struct ImportArgs {
    file: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dsl {
            command: DslCommand::Check { file, text },
        } => commands::dsl_check(&file, text.as_deref()),
        Command::Render(a) => commands::render(a),
        Command::Run(a) => commands::run(a),
        Command::Serve(a) => commands::serve(a),
        Command::Report(a) => commands::report(a),
        Command::Agent(a) => commands::agent(a),
        Command::Import(a) => commands::import(a),
        Command::Validate { files } => commands::validate(&files),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
