use std::path::PathBuf;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use lodfm::cache::FeatureCache;
use lodfm::fetch::Fetcher;
use lodfm::pipeline;
use lodfm::sparql::{SparqlClient, SparqlEndpointConfig};
use lodfm::ExperimentConfig;
use lodfm_core::eval::CandidateSet;
use lodfm_core::synthetic::SyntheticConfig;
use lodfm_core::FeatureConfig;

#[derive(Parser)]
#[command(name = "lodfm", version, about = "Top-N recommendation with factorization machines over linked-data item features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve and cache item knowledge from a SPARQL endpoint.
    FetchFeatures(FetchArgs),
    /// Train one model and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lodfm")]
        model: String,
        /// Checkpoint directory (defaults to <output_dir>/model).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint on the configured split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate a line-up of models on one split.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated model ids.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Also log deltas against the published reference numbers.
        #[arg(long)]
        replicate: bool,
    },
    /// Compare the PO, PO+SP, PO+PR and PO+SP+PR feature sets.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one FM per dimensionality.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic catalog with a ready-to-run config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
    },
}

#[derive(Args)]
struct FetchArgs {
    /// One item URI per line, or `item_id<TAB>uri` lines.
    #[arg(long)]
    items: PathBuf,
    #[arg(long, default_value = "https://dbpedia.org/sparql")]
    endpoint: String,
    #[arg(long, default_value = "cache")]
    cache: PathBuf,
    #[arg(long, default_value = "po,sp,pr")]
    sets: FeatureConfig,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// SPARQL endpoint for features missing from the cache.
    #[arg(long)]
    endpoint: Option<String>,
    /// LODFM feature sets, e.g. `po,pr`.
    #[arg(long)]
    features: Option<FeatureConfig>,
    /// Factorization dimensionality; a list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Neighbors of kNN-item.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    candidates: Option<CandidateSet>,
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run paired significance tests against `--baseline`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    significance: Option<bool>,
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl Common {
    fn resolve(&self, sweep: bool) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let set = |dst: &mut PathBuf, src: &Option<PathBuf>| {
            if let Some(s) = src {
                *dst = s.clone();
            }
        };
        set(&mut cfg.ratings, &self.ratings);
        set(&mut cfg.mapping, &self.mapping);
        set(&mut cfg.cache_dir, &self.cache);
        set(&mut cfg.output_dir, &self.out);
        if let Some(url) = &self.endpoint {
            cfg.endpoint = Some(SparqlEndpointConfig {
                endpoint: url.clone(),
                cache_dir: cfg.cache_dir.clone(),
                ..cfg.endpoint.clone().unwrap_or_default()
            });
        }
        if let Some(f) = self.features {
            cfg.features = f.to_string();
        }
        match (&self.m, sweep) {
            (Some(dims), true) => cfg.sweep_m = dims.clone(),
            (Some(dims), false) => {
                let [m] = dims.as_slice() else {
                    bail!("--m takes a single value here");
                };
                cfg.fm.num_factors = *m;
                cfg.bprmf.num_factors = *m;
                cfg.ablation_m = *m;
            }
            (None, _) => {}
        }
        if let Some(k) = self.k {
            cfg.knn_k = k;
        }
        if let Some(c) = self.candidates {
            cfg.candidates = c;
        }
        if let Some(c) = &self.cutoffs {
            cfg.cutoffs = c.clone();
        }
        if let Some(s) = self.seed {
            cfg.split_seed = s;
            cfg.fm.seed = s;
            cfg.bprmf.seed = s;
        }
        if let Some(s) = self.significance {
            cfg.significance = s;
        }
        if let Some(b) = &self.baseline {
            cfg.baseline = b.clone();
        }
        if let Some(r) = self.resamples {
            cfg.resamples = r;
        }
        if let Some(e) = self.epochs {
            cfg.fm.max_epochs = e;
            cfg.bprmf.max_epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_items(path: &PathBuf) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.rsplit('\t').next().unwrap_or(l).to_string())
        .collect())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::FetchFeatures(a) => {
            let items = read_items(&a.items)?;
            if items.is_empty() {
                bail!("no items in {}", a.items.display());
            }
            let endpoint = SparqlEndpointConfig {
                endpoint: a.endpoint,
                timeout_secs: a.timeout,
                max_retries: a.retries,
                max_concurrent: a.concurrency,
                cache_dir: a.cache.clone(),
                ..Default::default()
            };
            let fetcher = Fetcher::new(Some(SparqlClient::new(endpoint)?), FeatureCache::new(&a.cache));
            let report = fetcher.fetch_all(&items, a.sets, a.concurrency);
            println!(
                "{} items fetched, {} failed, {} endpoint queries",
                report.knowledge.len(),
                report.failures.len(),
                fetcher.network_fetches()
            );
            for f in &report.failures {
                println!("failed\t{}\t{}", f.item, f.message);
            }
            if !report.failures.is_empty() {
                std::process::exit(2);
            }
        }
        Command::Train { common, model, checkpoint } => {
            let cfg = common.resolve(false)?;
            let dir = checkpoint.unwrap_or_else(|| cfg.output_dir.join("model"));
            pipeline::train(&cfg, &model, &dir)?;
            println!("checkpoint written to {}", dir.display());
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = common.resolve(false)?;
            print!("{}", pipeline::evaluate(&cfg, &checkpoint)?.to_table());
        }
        Command::Compare { common, models, replicate } => {
            let mut cfg = common.resolve(false)?;
            if let Some(m) = models {
                cfg.models = m;
            }
            print!("{}", pipeline::compare(&cfg, replicate)?.to_table());
        }
        Command::Ablate { common } => {
            let cfg = common.resolve(false)?;
            print!("{}", pipeline::ablate(&cfg)?.to_table());
        }
        Command::Sweep { common } => {
            let cfg = common.resolve(true)?;
            print!("{}", pipeline::sweep(&cfg, &cfg.sweep_m)?.to_table());
        }
        Command::Synth { out, seed, users, items } => {
            let defaults = SyntheticConfig::default();
            let synthetic = SyntheticConfig {
                users: users.unwrap_or(defaults.users),
                items: items.unwrap_or(defaults.items),
                ..defaults
            };
            let path = pipeline::synth(&out, seed, &synthetic)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
