//! `topicbench` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 corpus error,
//! 3 partial failure (some (method, K) cells failed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topicbench::corpus::CorpusFormat;
use topicbench::experiment::{manifest_exit_code, run_experiment, Method, RunConfig};
use topicbench::synth::{planted_corpus, PlantedConfig};

const EXIT_CONFIG: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "topicbench",
    version,
    about = "Compare LDA, NMF and tensor topic models on a report corpus"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep K for every method, evaluate, select, and write the result tree.
    Run(RunArgs),
    /// Write a planted-topic JSONL corpus for protocol checks.
    Synth(SynthArgs),
    /// Print the effective configuration as TOML without running anything.
    Config(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `jsonl` or `text-dir`.
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated subset of lda,nmf,ntf.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// K values: a comma-separated list and/or ranges such as `2-6`.
    #[arg(long = "k")]
    k: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_df: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metadata filter `key=value` (year, year_min, year_max, category, report_type); repeatable.
    #[arg(long = "filter", value_name = "KEY=VALUE")]
    filters: Vec<String>,
    /// Concurrent (method, K) cells; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Keywords per topic used for keyword matching.
    #[arg(long)]
    n_keywords: Option<usize>,
    /// Silhouette margin of the selection candidate set.
    #[arg(long)]
    margin: Option<f64>,
    /// Also write TF, TF-IDF and tensor inputs under out/data.
    #[arg(long)]
    export_matrices: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Destination JSONL file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = PlantedConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = PlantedConfig::default().n_docs)]
    docs: usize,
    #[arg(long, default_value_t = PlantedConfig::default().n_topics)]
    topics: usize,
    #[arg(long, default_value_t = PlantedConfig::default().n_companies)]
    companies: usize,
}

fn parse_k_values(spec: &str) -> Result<Vec<usize>, String> {
    let mut ks = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad K value \"{s}\""))
        };
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(format!("empty K range \"{part}\""));
                }
                ks.extend(lo..=hi);
            }
            None => ks.push(num(part)?),
        }
    }
    if ks.is_empty() {
        return Err("no K values given".into());
    }
    Ok(ks)
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(corpus) = &args.corpus {
        cfg.corpus = corpus.clone();
    }
    if let Some(format) = &args.format {
        cfg.format = format.parse::<CorpusFormat>().map_err(|e| e.to_string())?;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
    }
    if let Some(k) = &args.k {
        cfg.k_values = parse_k_values(k)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(min_df) = args.min_df {
        cfg.min_df = min_df;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    for filter in &args.filters {
        let (key, value) = filter
            .split_once('=')
            .ok_or_else(|| format!("filter \"{filter}\" is not key=value"))?;
        cfg.filters.set(key, value).map_err(|e| e.to_string())?;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    if let Some(n) = args.n_keywords {
        cfg.n_keywords = n;
    }
    if let Some(margin) = args.margin {
        cfg.selection_margin = margin;
    }
    cfg.export_matrices |= args.export_matrices;
    cfg.normalized().map_err(|e| e.to_string())
}

fn run(args: &RunArgs) -> u8 {
    let cfg = match resolve_config(args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    match run_experiment(&cfg) {
        Ok(manifest) => {
            for cell in manifest.cells.iter().filter(|c| !c.ok) {
                eprintln!(
                    "cell {} k={} failed: {}",
                    cell.method,
                    cell.k,
                    cell.error.as_deref().unwrap_or("unknown error")
                );
            }
            if let Some(sel) = &manifest.selection {
                for choice in &sel.per_method {
                    println!("{}: best K = {}", choice.method, choice.k);
                }
                println!("overall: {} K = {}", sel.overall.method, sel.overall.k);
            }
            println!("results in {}", cfg.out.display());
            manifest_exit_code(&manifest) as u8
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code() as u8
        }
    }
}

fn synth(args: &SynthArgs) -> u8 {
    let cfg = PlantedConfig {
        seed: args.seed,
        n_docs: args.docs,
        n_topics: args.topics,
        n_companies: args.companies,
        ..PlantedConfig::default()
    };
    let written = planted_corpus(&cfg)
        .and_then(|c| c.to_jsonl())
        .and_then(|text| topicbench::experiment::output::write_atomic(&args.out, text.as_bytes()));
    match written {
        Ok(()) => {
            println!("wrote {} documents to {}", cfg.n_docs, args.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; help and version are not errors.
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let code = match &cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
        Command::Config(args) => {
            match resolve_config(args).and_then(|c| c.to_toml_string().map_err(|e| e.to_string())) {
                Ok(text) => {
                    print!("{text}");
                    0
                }
                Err(msg) => {
                    eprintln!("error: {msg}");
                    EXIT_CONFIG
                }
            }
        }
    };
    ExitCode::from(code)
}
