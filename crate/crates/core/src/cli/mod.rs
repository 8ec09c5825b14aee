//! Command-line entry point: one subcommand per pipeline stage.

mod config;
mod play;
mod stages;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{CorpusConfig, Paths, RunConfig, ServeConfig, DATA_DIR_ENV, DEFAULT_DATA_DIR};
pub use play::{parse_answer, play};
pub use stages::{
    eval_stage, file_hash, gen_corpus, load_agent, pretrain_stage, reps_for, stats_stage,
    train_nlu_stage, train_rl_stage, Manifest, Stage, CHECKPOINT_FILE, MANIFEST_FILE, VERSION,
};

use crate::engine::NluMode;
use crate::error::Result;
use crate::policy::PolicyMode;

#[derive(Debug, Parser)]
#[command(
    name = "md3",
    version,
    about = "Train, evaluate and play the document-guessing dialogue agent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic movie corpus and scripted dialogues.
    GenCorpus(Flags),
    /// Pretrain the document encoder with the contrastive objective.
    Pretrain(Flags),
    /// Train the turn understanding model on scripted dialogues.
    TrainNlu(Flags),
    /// Train the policy projection with REINFORCE.
    TrainRl(Flags),
    /// Evaluate a policy on simulated users, or replay transcripts.
    Eval(Flags),
    /// Print corpus statistics.
    Stats(Flags),
    /// Play a game in the terminal.
    Play(Flags),
    /// Run the HTTP game service.
    Serve(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of movies to generate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Candidate documents per dialogue.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Policy: dapo, dapo_no_AU, dapo_no_AB, rand, fixed or oracle.
    #[arg(long)]
    pub mode: Option<PolicyMode>,
    /// Understanding: neural or oracle.
    #[arg(long)]
    pub nlu: Option<NluMode>,
    /// Belief needed before guessing.
    #[arg(long = "k-threshold")]
    pub k_threshold: Option<f64>,
    #[arg(long = "max-turns")]
    pub max_turns: Option<usize>,
    /// Chance that the simulated user forgets an attribute.
    #[arg(long = "mask-p")]
    pub mask_p: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Episode log to replay through the agent (eval only).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long = "data-dir")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Listen address for `serve`.
    #[arg(long)]
    pub addr: Option<String>,
    /// Directory with the built web client for `serve`.
    #[arg(long = "static-dir")]
    pub static_dir: Option<PathBuf>,
}

impl Flags {
    /// The config file (or defaults) with flags applied on top.
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.n {
            c.corpus.n = v;
        }
        if let Some(v) = self.m {
            c.eval.m = v;
            c.rl.m = v;
        }
        if let Some(v) = self.episodes {
            c.eval.episodes = v;
            c.rl.episodes = v;
        }
        if let Some(v) = self.mode {
            c.policy.mode = v;
        }
        if let Some(v) = self.nlu {
            c.nlu_mode = v;
        }
        if let Some(v) = self.k_threshold {
            c.policy.k = v;
        }
        if let Some(v) = self.max_turns {
            c.policy.max_turns = v;
        }
        if let Some(v) = self.mask_p {
            c.eval.mask_p = v;
            c.rl.mask_p = v;
        }
        if self.out.is_some() {
            c.paths.out = self.out.clone();
        }
        if self.data_dir.is_some() {
            c.paths.data_dir = self.data_dir.clone();
        }
        if self.corpus.is_some() {
            c.paths.corpus = self.corpus.clone();
        }
        if self.checkpoint.is_some() {
            c.paths.checkpoint = self.checkpoint.clone();
        }
        if let Some(v) = &self.addr {
            c.serve.addr = v.clone();
        }
        if self.static_dir.is_some() {
            c.serve.static_dir = self.static_dir.clone();
        }
        Ok(c.resolve())
    }
}

/// Runs one stage. Returns the process exit code: 0 on success, 1 when the
/// stage fails, 2 for usage errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    let report = |dir: PathBuf| println!("{}", dir.display());
    match command {
        Command::GenCorpus(f) => report(gen_corpus(&f.config()?)?),
        Command::Pretrain(f) => report(pretrain_stage(&f.config()?)?),
        Command::TrainNlu(f) => report(train_nlu_stage(&f.config()?)?),
        Command::TrainRl(f) => report(train_rl_stage(&f.config()?)?),
        Command::Eval(f) => report(eval_stage(&f.config()?, f.replay.as_deref())?),
        Command::Stats(f) => print!("{}", stats_stage(&f.config()?)?.1),
        Command::Play(f) => {
            let config = f.config()?;
            let agent = load_agent(&config)?;
            let stdin = std::io::stdin();
            if let Some(log) = play(
                &agent,
                config.eval.m,
                config.seed,
                stdin.lock(),
                std::io::stdout(),
            )? {
                let dir = config
                    .paths
                    .out
                    .clone()
                    .unwrap_or_else(|| config.data_dir().join("play"));
                std::fs::create_dir_all(&dir)?;
                let mut file = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(dir.join("transcripts.jsonl"))?;
                writeln!(file, "{}", serde_json::to_string(&log)?)?;
            }
        }
        Command::Serve(f) => crate::service::serve(f.config()?)?,
    }
    Ok(())
}
