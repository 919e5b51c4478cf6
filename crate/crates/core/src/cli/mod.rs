//! Command-line front end.

pub mod formats;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::decoder::{generate_corpus, kbest_decode, read_corpus, write_corpus, Split, SyntheticCorpus};
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, paired_bootstrap, read_token_file};
use crate::optimizer::{optimize_objective, OptimizeOptions, OptimizerConfig};
use crate::pro::ProConfig;
use crate::ranking::{KBestList, LossKind};
use crate::tuning::{compare_methods, tune, BootstrapOptions, InitialWeights, Method, MethodSpec, PoolMode, TuningConfig};
use formats::{write_file, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "listtune", version, about = "Listwise tuning of linear k-best rerankers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus from a key = value config file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output JSONL path; planted weights go to <out>.planted.tsv
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune one method and write final weights plus the iteration log.
    Tune(TuneArgs),
    /// Tune several methods over several seeds and report dev/test BLEU.
    Compare(CompareArgs),
    /// Per-epoch loss and top-1 BLEU of a single optimization run.
    Losscurve(LosscurveArgs),
    /// Corpus BLEU of a hypothesis file, optionally bootstrapped against a second system.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        against: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args, Clone)]
pub struct TrainingFlags {
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long = "outer-iters", default_value_t = 40)]
    pub outer_iters: usize,
    /// Epochs per optimization; defaults to 300 for listnet, 200 for the
    /// ListMLE family and 100 for pro.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size", default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value = "aggregate")]
    pub pool: String,
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// zero | random:<scale> | <weights.tsv>
    #[arg(long, default_value = "zero")]
    pub init: String,
    #[arg(long = "pro-samples", default_value_t = 5000)]
    pub pro_samples: usize,
    #[arg(long = "pro-keep", default_value_t = 50)]
    pub pro_keep: usize,
    #[arg(long = "pro-min-gap", default_value_t = 0.05)]
    pub pro_min_gap: f64,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// listnet | listmle | listmle-te | listmle-topn | pro
    #[arg(long)]
    pub method: String,
    /// Rank cutoff for listmle-topn (default 5).
    #[arg(long)]
    pub topn: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated methods, each `name[:aggregate|:merge]`, where name is
    /// listnet, listmle, listmle-te, listmle-topN or pro.
    #[arg(long)]
    pub methods: String,
    #[arg(long, default_value = "1,2,3")]
    pub seeds: String,
    /// Method label to bootstrap every other method against.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long = "bootstrap-samples", default_value_t = 1000)]
    pub bootstrap_samples: usize,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct LosscurveArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub topn: Option<usize>,
    /// single-list: one dev sentence's k-best list; single-iteration: every
    /// dev sentence decoded once.
    #[arg(long, default_value = "single-list")]
    pub mode: String,
    /// Dev sentence index for single-list mode.
    #[arg(long, default_value_t = 0)]
    pub sentence: usize,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long = "batch-size", default_value_t = 10)]
    pub batch_size: usize,
    /// Use the whole pool as one batch.
    #[arg(long = "full-batch")]
    pub full_batch: bool,
    #[arg(long, default_value = "random:0.1")]
    pub init: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(name: &str, topn: Option<usize>, training: &TrainingFlags, seed: u64) -> Result<Method> {
    if topn.is_some() && name != "listmle-topn" {
        return Err(Error::Usage(format!("--topn only applies to listmle-topn, not '{name}'")));
    }
    match name {
        "listmle-topn" => {
            let n = topn.unwrap_or(5);
            if n == 0 {
                return Err(Error::Usage("--topn must be at least 1".into()));
            }
            Ok(Method::Listwise(LossKind::ListMleTopN(n)))
        }
        "pro" => Ok(Method::Pro(ProConfig {
            samples: training.pro_samples,
            keep: training.pro_keep,
            min_gap: training.pro_min_gap,
            epochs: training.epochs.unwrap_or(100),
            seed,
        })),
        other => Ok(Method::Listwise(other.parse()?)),
    }
}

fn default_epochs(method: &Method) -> usize {
    match method {
        Method::Listwise(LossKind::ListNet) => 300,
        Method::Listwise(_) => 200,
        Method::Pro(p) => p.epochs,
    }
}

fn parse_init(spec: &str, corpus: &mut SyntheticCorpus) -> Result<InitialWeights> {
    if spec == "zero" {
        return Ok(InitialWeights::Zero);
    }
    if let Some(scale) = spec.strip_prefix("random:") {
        let scale: f64 = scale
            .parse()
            .map_err(|_| Error::Usage(format!("bad random init scale '{scale}'")))?;
        return Ok(InitialWeights::Random { scale });
    }
    Ok(InitialWeights::Given(formats::read_weights(Path::new(spec), &mut corpus.features)?))
}

fn tuning_config(method: Method, flags: &TrainingFlags, init: InitialWeights, seed: u64) -> Result<TuningConfig> {
    let epochs = flags.epochs.unwrap_or_else(|| default_epochs(&method));
    Ok(TuningConfig {
        outer_iterations: flags.outer_iters,
        k: flags.k,
        pool_mode: flags.pool.parse()?,
        method,
        optimizer: OptimizerConfig {
            batch_size: flags.batch_size,
            epochs,
            rho: flags.rho,
            epsilon: flags.epsilon,
            seed,
        },
        init,
        seed,
    })
}

fn record_training(manifest: &mut RunManifest, flags: &TrainingFlags) {
    manifest.push("k", flags.k);
    manifest.push("outer_iters", flags.outer_iters);
    manifest.push("epochs", flags.epochs.map(|e| e.to_string()).unwrap_or_else(|| "default".into()));
    manifest.push("batch_size", flags.batch_size);
    manifest.push("pool", &flags.pool);
    manifest.push("rho", flags.rho);
    manifest.push("epsilon", flags.epsilon);
    manifest.push("init", &flags.init);
}

fn finish_manifest(path: &Path, manifest: &mut RunManifest, started: Instant) -> Result<()> {
    manifest.push("wall_time_ms", started.elapsed().as_millis());
    write_file(path, &manifest.render())
}

pub fn cmd_generate(config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let cfg = formats::parse_generator_config(&text)?;
    let (corpus, planted) = generate_corpus(&cfg)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    write_corpus(&corpus, out)?;
    write_file(&planted_path(out), &formats::format_weights(&planted, &corpus.features))
}

pub fn planted_path(corpus_path: &Path) -> PathBuf {
    corpus_path.with_extension("planted.tsv")
}

pub fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let started = Instant::now();
    let method = parse_method(&args.method, args.topn, &args.training, args.seed)?;
    let mut corpus = read_corpus(&args.corpus)?;
    let init = parse_init(&args.training.init, &mut corpus)?;
    let cfg = tuning_config(method, &args.training, init, args.seed)?;

    let manifest_path = args.out_dir.join("manifest.txt");
    let mut manifest = RunManifest::new("tune");
    manifest.push("corpus", args.corpus.display());
    manifest.push("method", cfg.method.name());
    manifest.push("seed", args.seed);
    record_training(&mut manifest, &args.training);
    manifest.push("weights_out", args.out_dir.join("weights.tsv").display());
    manifest.push("iterations_out", args.out_dir.join("iterations.csv").display());
    write_file(&manifest_path, &manifest.render())?;

    let out = tune(&corpus, &cfg)?;
    write_file(&args.out_dir.join("weights.tsv"), &formats::format_weights(&out.weights, &corpus.features))?;
    write_file(&args.out_dir.join("iterations.csv"), &formats::format_iterations(&out.records))?;
    finish_manifest(&manifest_path, &mut manifest, started)
}

/// Parses one `name[:pool]` entry of `--methods`.
fn parse_method_spec(entry: &str, flags: &TrainingFlags) -> Result<(String, Method, Option<PoolMode>)> {
    let (name, pool) = match entry.split_once(':') {
        Some((n, p)) => (n, Some(p.parse::<PoolMode>()?)),
        None => (entry, None),
    };
    let method = match name {
        "pro" => parse_method("pro", None, flags, 0)?,
        "listmle-topn" => Method::Listwise(LossKind::ListMleTopN(5)),
        other => Method::Listwise(other.parse()?),
    };
    Ok((entry.to_owned(), method, pool))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let started = Instant::now();
    let mut corpus = read_corpus(&args.corpus)?;
    let init = parse_init(&args.training.init, &mut corpus)?;
    let seeds = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| Error::Usage(format!("bad seed '{s}'"))))
        .collect::<Result<Vec<_>>>()?;
    let mut specs = Vec::new();
    for entry in args.methods.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (label, method, pool) = parse_method_spec(entry, &args.training)?;
        let mut config = tuning_config(method, &args.training, init.clone(), 0)?;
        if let Some(pool) = pool {
            config.pool_mode = pool;
        }
        specs.push(MethodSpec { label, config });
    }
    if specs.is_empty() {
        return Err(Error::Usage("--methods is empty".into()));
    }

    let manifest_path = args.out_dir.join("manifest.txt");
    let mut manifest = RunManifest::new("compare");
    manifest.push("corpus", args.corpus.display());
    manifest.push("methods", &args.methods);
    manifest.push("seeds", &args.seeds);
    manifest.push("baseline", args.baseline.as_deref().unwrap_or("none"));
    manifest.push("bootstrap_samples", args.bootstrap_samples);
    record_training(&mut manifest, &args.training);
    manifest.push("report_out", args.out_dir.join("report.csv").display());
    manifest.push("table_out", args.out_dir.join("table.txt").display());
    write_file(&manifest_path, &manifest.render())?;

    let boot = BootstrapOptions {
        baseline: args.baseline.clone(),
        samples: args.bootstrap_samples,
        seed: 0,
    };
    let report = compare_methods(&corpus, &specs, &seeds, &boot)?;
    let table = formats::format_table(&report);
    write_file(&args.out_dir.join("report.csv"), &formats::format_report(&report))?;
    write_file(&args.out_dir.join("table.txt"), &table)?;
    print!("{table}");
    finish_manifest(&manifest_path, &mut manifest, started)
}

pub fn cmd_losscurve(args: &LosscurveArgs) -> Result<()> {
    let flags = TrainingFlags {
        k: args.k,
        outer_iters: 1,
        epochs: Some(args.epochs),
        batch_size: args.batch_size,
        pool: "aggregate".into(),
        rho: crate::optimizer::DEFAULT_RHO,
        epsilon: crate::optimizer::DEFAULT_EPSILON,
        init: args.init.clone(),
        pro_samples: 5000,
        pro_keep: 50,
        pro_min_gap: 0.05,
    };
    let method = parse_method(&args.method, args.topn, &flags, args.seed)?;
    let Method::Listwise(kind) = method else {
        return Err(Error::Usage("losscurve supports listwise methods only".into()));
    };
    let mut corpus = read_corpus(&args.corpus)?;
    let init = parse_init(&args.init, &mut corpus)?;
    let cfg = tuning_config(method, &flags, init, args.seed)?;
    cfg.validate(&corpus)?;
    let w0 = crate::tuning::initial_weights_for(&corpus, &cfg);

    let dev: Vec<_> = corpus.split(Split::Dev).collect();
    let lists: Vec<KBestList> = match args.mode.as_str() {
        "single-list" => {
            let pool = dev
                .get(args.sentence)
                .ok_or_else(|| Error::Usage(format!("dev sentence {} does not exist", args.sentence)))?;
            vec![kbest_decode(pool, &w0, args.k, 0)?]
        }
        "single-iteration" => dev.iter().map(|p| kbest_decode(p, &w0, args.k, 0)).collect::<Result<_>>()?,
        other => return Err(Error::Usage(format!("unknown losscurve mode '{other}'"))),
    };
    let mut opt = cfg.optimizer.clone();
    if args.full_batch {
        opt.batch_size = lists.len();
    }
    let out = optimize_objective(&lists, &lists, &w0, &kind, &opt, OptimizeOptions { track_loss: true })?;
    write_file(&args.out, &formats::format_losscurve(&out.trace))
}

pub fn cmd_bleu(hyp: &Path, reference: &Path, against: Option<&Path>, samples: usize, seed: u64) -> Result<String> {
    let hyps = read_token_file(hyp)?;
    let refs = read_token_file(reference)?;
    if hyps.len() != refs.len() {
        return Err(Error::Input(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let bleu = corpus_bleu(hyps.iter().zip(&refs))?;
    let mut out = format!("BLEU = {:.2}\n", 100.0 * bleu);
    if let Some(other) = against {
        let other_hyps = read_token_file(other)?;
        let p = paired_bootstrap(&hyps, &other_hyps, &refs, samples, seed)?;
        out.push_str(&format!("p = {p}\n"));
    }
    Ok(out)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { config, out } => cmd_generate(config, out),
        Command::Tune(args) => cmd_tune(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Losscurve(args) => cmd_losscurve(args),
        Command::Bleu {
            hyp,
            reference,
            against,
            samples,
            seed,
        } => {
            print!("{}", cmd_bleu(hyp, reference, against.as_deref(), *samples, *seed)?);
            Ok(())
        }
    }
}
