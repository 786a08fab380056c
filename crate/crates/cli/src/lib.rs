//! Subcommands of the `gstgec` binary.
//!
//! Every command that writes a file also writes `<output>.manifest.toml`
//! holding the command, the fully resolved configuration, the seed and the
//! input and output paths. A manifest can be passed back through
//! `--config` to repeat the run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gst_core::corpus::{
    load_checkpoint, read_parallel_tsv, read_sentences, save_checkpoint, write_labeled_tsv, write_parallel_tsv,
};
use gst_core::eval::{score_corpus, ScoreReport};
use gst_core::inference::correct;
use gst_core::sampler::SamplingMode;
use gst_core::trainer::corrupt::{corrupt_corpus, toy_sentences, CorruptionConfig, CorruptionRule};
use gst_core::trainer::{run_gst, synthesize_dataset, Pairing, TrainingConfig};
use gst_core::{Dataset, SentencePair};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bad flags or configuration; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "gstgec", version, about = "Sequence-labeling grammatical error correction")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML configuration or a manifest from an earlier run. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract edit labels from a parallel TSV.
    Align {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Supervised training on genuine data only.
    Train(TrainArgs),
    /// Staged training with self-synthesized errors.
    Gst {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Correct one sentence per input line.
    Correct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        inference: InferenceArgs,
        /// Write per-round traces to `<output>.trace` (or standard error).
        #[arg(long)]
        trace: bool,
    },
    /// Score corrections against references.
    Evaluate {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        hypotheses: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Also print a CSV header and row.
        #[arg(long)]
        csv: bool,
    },
    /// Sample a synthetic dataset from a trained model.
    Synthesize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        inference: InferenceArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Stage index mixed into the per-sentence seeds.
        #[arg(long, default_value_t = 1)]
        stage: usize,
    },
    /// Generate clean template sentences and corrupt them into a parallel TSV.
    ToyCorpus {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0.15)]
        rate: f64,
        /// Comma-separated subset of verb_form, article_deletion,
        /// duplication, case_flip, plural_toggle.
        #[arg(long, value_delimiter = ',')]
        rules: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct InferenceArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    /// gumbel, multinomial or random.
    #[arg(long)]
    pub sampling: Option<String>,
    /// realign or literal.
    #[arg(long)]
    pub pairing: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Parallel TSV of errorful and corrected sentences.
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out parallel TSV scored after every epoch.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Checkpoint path; the epoch CSV goes to `<out>.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub min_freq: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub synthesis_gamma: Option<f64>,
    #[arg(long)]
    pub synthesis_beta: Option<f64>,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

/// Reads `--config`. A manifest contributes its `[config]` table.
pub fn load_config(path: Option<&Path>) -> Result<TrainingConfig> {
    let Some(path) = path else {
        return Ok(TrainingConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(toml::Value::Table(inner)) = table.remove("config") {
        table = inner;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn apply_inference(cfg: &mut TrainingConfig, a: &InferenceArgs) {
    if let Some(g) = a.gamma {
        cfg.inference.gamma = g;
    }
    if let Some(b) = a.beta {
        cfg.inference.beta = b;
    }
    if let Some(m) = a.max_iters {
        cfg.inference.max_iters = m;
    }
}

fn apply_sampling(cfg: &mut TrainingConfig, a: &SamplingArgs) -> Result<()> {
    if let Some(t) = a.tau {
        cfg.sampling.tau = t;
    }
    if let Some(m) = &a.sampling {
        cfg.sampling.mode = m.parse::<SamplingMode>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(p) = &a.pairing {
        cfg.pairing = p.parse::<Pairing>().map_err(usage)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
        cfg.sampling.seed = s;
    }
    Ok(())
}

fn apply_train(cfg: &mut TrainingConfig, a: &TrainArgs) -> Result<()> {
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut cfg.epochs_per_stage, a.epochs);
    set(&mut cfg.batch_size, a.batch_size);
    set(&mut cfg.min_freq, a.min_freq);
    set(&mut cfg.model.d_model, a.d_model);
    set(&mut cfg.model.n_layers, a.layers);
    set(&mut cfg.model.n_heads, a.heads);
    set(&mut cfg.model.d_ff, a.d_ff);
    set(&mut cfg.model.max_len, a.max_len);
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if a.synthesis_gamma.is_some() {
        cfg.synthesis_gamma = a.synthesis_gamma;
    }
    if a.synthesis_beta.is_some() {
        cfg.synthesis_beta = a.synthesis_beta;
    }
    apply_inference(cfg, &a.inference);
    apply_sampling(cfg, &a.sampling)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes `<primary>.manifest.toml`.
fn write_manifest(
    primary: &Path,
    command: &str,
    seed: Option<u64>,
    config: Option<&TrainingConfig>,
    inputs: &[(&str, &Path)],
    outputs: &[(&str, &Path)],
    extra: &[(&str, toml::Value)],
) -> Result<()> {
    let mut t = toml::Table::new();
    t.insert("command".into(), command.into());
    t.insert("version".into(), VERSION.into());
    if let Some(s) = seed {
        t.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    let paths = |items: &[(&str, &Path)]| {
        let mut m = toml::Table::new();
        for (k, p) in items {
            m.insert((*k).into(), p.display().to_string().into());
        }
        toml::Value::Table(m)
    };
    t.insert("inputs".into(), paths(inputs));
    t.insert("outputs".into(), paths(outputs));
    for (k, v) in extra {
        t.insert((*k).into(), v.clone());
    }
    if let Some(cfg) = config {
        t.insert("config".into(), toml::Value::try_from(cfg).context("serializing config")?);
    }
    write_file(&with_suffix(primary, ".manifest.toml"), &toml::to_string_pretty(&t)?)
}

fn read_pairs(path: &Path) -> Result<Vec<SentencePair>> {
    Ok(read_parallel_tsv(path)?)
}

fn cmd_align(input: &Path, output: &Path) -> Result<()> {
    let data = Dataset::from_pairs(read_pairs(input)?);
    write_labeled_tsv(output, data.examples.iter().map(|e| (&e.pair.source, &e.labels)))?;
    write_manifest(output, "align", None, None, &[("input", input)], &[("labels", output)], &[])?;
    log::info!("wrote {} labeled sentences to {}", data.len(), output.display());
    Ok(())
}

fn cmd_train(cfg: TrainingConfig, args: &TrainArgs, command: &str) -> Result<()> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let train = Dataset::from_pairs(read_pairs(&args.data)?);
    let heldout = match &args.heldout {
        Some(p) => Dataset::from_pairs(read_pairs(p)?),
        None => Dataset::default(),
    };
    let outcome = run_gst(&train, &heldout, &cfg)?;
    let mut extra = BTreeMap::new();
    extra.insert("stages".to_string(), cfg.stages.to_string());
    save_checkpoint(&args.out, &outcome.labeler, &extra)?;
    let csv = with_suffix(&args.out, ".csv");
    write_file(&csv, &outcome.epoch_csv())?;
    let mut stage_csv = String::from("stage,genuine,synthetic,precision,recall,f0.5,synthesized_next,synthesis_error_rate\n");
    for s in &outcome.stages {
        let (p, r, f) = s
            .heldout
            .map(|h| (format!("{:.4}", h.precision * 100.0), format!("{:.4}", h.recall * 100.0), format!("{:.4}", h.f_half * 100.0)))
            .unwrap_or_default();
        stage_csv.push_str(&format!(
            "{},{},{},{p},{r},{f},{},{}\n",
            s.stage,
            s.genuine_examples,
            s.synthetic_examples,
            s.synthesized.map(|n| n.to_string()).unwrap_or_default(),
            s.synthesis_error_rate.map(|x| format!("{x:.6}")).unwrap_or_default(),
        ));
    }
    let stages = with_suffix(&args.out, ".stages.csv");
    write_file(&stages, &stage_csv)?;
    let mut inputs = vec![("data", args.data.as_path())];
    if let Some(h) = &args.heldout {
        inputs.push(("heldout", h.as_path()));
    }
    write_manifest(
        &args.out,
        command,
        Some(cfg.seed),
        Some(&cfg),
        &inputs,
        &[("checkpoint", &args.out), ("epochs_csv", &csv), ("stages_csv", &stages)],
        &[("sampling_mode", cfg.sampling.mode.as_str().into())],
    )?;
    if let Some(f) = outcome.final_f_half() {
        println!("final held-out F0.5 {:.2}", f * 100.0);
    }
    Ok(())
}

fn cmd_correct(
    cfg: TrainingConfig,
    model: &Path,
    input: &Path,
    output: Option<&Path>,
    trace: bool,
) -> Result<()> {
    let inf = cfg.inference;
    inf.validate().map_err(|e| usage(e.to_string()))?;
    let (labeler, _) = load_checkpoint(model)?;
    let sentences = read_sentences(input)?;
    use rayon::prelude::*;
    let traces = sentences
        .par_iter()
        .map(|s| correct(&labeler, s, &inf))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::new();
    for t in &traces {
        text.push_str(&t.output.detokenize());
        text.push('\n');
    }
    let report = || traces.iter().map(|t| t.report()).collect::<Vec<_>>().join("\n");
    match output {
        Some(out) => {
            write_file(out, &text)?;
            let mut outputs = vec![("corrected", out.to_path_buf())];
            if trace {
                let tp = with_suffix(out, ".trace");
                write_file(&tp, &report())?;
                outputs.push(("trace", tp));
            }
            let outputs: Vec<(&str, &Path)> = outputs.iter().map(|(k, p)| (*k, p.as_path())).collect();
            write_manifest(out, "correct", None, Some(&cfg), &[("model", model), ("input", input)], &outputs, &[])?;
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            if trace {
                io::stderr().write_all(report().as_bytes())?;
            }
        }
    }
    Ok(())
}

fn cmd_evaluate(sources: &Path, hypotheses: &Path, references: &Path, csv: bool) -> Result<ScoreReport> {
    let s = read_sentences(sources)?;
    let h = read_sentences(hypotheses)?;
    let r = read_sentences(references)?;
    let report = score_corpus(&s, &h, &r)?;
    println!("{report}");
    if csv {
        println!("{}", ScoreReport::CSV_HEADER);
        println!("{}", report.csv_row());
    }
    Ok(report)
}

fn cmd_synthesize(cfg: TrainingConfig, model: &Path, data: &Path, out: &Path, stage: usize) -> Result<()> {
    let gate = cfg.synthesis();
    gate.validate().map_err(|e| usage(e.to_string()))?;
    cfg.sampling.validate().map_err(|e| usage(e.to_string()))?;
    let (labeler, _) = load_checkpoint(model)?;
    let genuine = Dataset::from_pairs(read_pairs(data)?);
    let syn = synthesize_dataset(&labeler, &genuine, &gate, &cfg.sampling, cfg.pairing, stage)?;
    write_labeled_tsv(out, syn.examples.iter().map(|e| (&e.source, &e.labels)))?;
    write_manifest(
        out,
        "synthesize",
        Some(cfg.sampling.seed),
        Some(&cfg),
        &[("model", model), ("data", data)],
        &[("synthetic", out)],
        &[
            ("synthesized", toml::Value::Integer(syn.examples.len() as i64)),
            ("mean_error_rate", toml::Value::Float(syn.mean_error_rate)),
        ],
    )?;
    println!(
        "synthesized {} of {} sentences, mean sampled error rate {:.4}",
        syn.examples.len(),
        genuine.len(),
        syn.mean_error_rate
    );
    Ok(())
}

fn cmd_toy_corpus(count: usize, rate: f64, rules: &[String], seed: u64, out: &Path) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(usage(format!("rate must be in [0, 1], got {rate}")));
    }
    let rules = if rules.is_empty() {
        CorruptionRule::ALL.to_vec()
    } else {
        rules
            .iter()
            .map(|r| r.parse::<CorruptionRule>().map_err(usage))
            .collect::<Result<_>>()?
    };
    let cfg = CorruptionConfig { rate, rules };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = toy_sentences(count, &mut rng);
    let data = corrupt_corpus(&clean, &cfg, &mut rng);
    let pairs: Vec<SentencePair> = data.pairs().cloned().collect();
    write_parallel_tsv(out, &pairs)?;
    let rule_names: Vec<toml::Value> = cfg.rules.iter().map(|r| r.as_str().into()).collect();
    write_manifest(
        out,
        "toy-corpus",
        Some(seed),
        None,
        &[],
        &[("pairs", out)],
        &[
            ("count", toml::Value::Integer(count as i64)),
            ("rate", toml::Value::Float(rate)),
            ("rules", toml::Value::Array(rule_names)),
        ],
    )?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Align { input, output } => cmd_align(input, output),
        Command::Train(args) => {
            cfg.stages = 1;
            apply_train(&mut cfg, args)?;
            cmd_train(cfg, args, "train")
        }
        Command::Gst { train, stages } => {
            if let Some(n) = stages {
                cfg.stages = *n;
            }
            apply_train(&mut cfg, train)?;
            cmd_train(cfg, train, "gst")
        }
        Command::Correct {
            model,
            input,
            output,
            inference,
            trace,
        } => {
            apply_inference(&mut cfg, inference);
            cmd_correct(cfg, model, input, output.as_deref(), *trace)
        }
        Command::Evaluate {
            sources,
            hypotheses,
            references,
            csv,
        } => cmd_evaluate(sources, hypotheses, references, *csv).map(|_| ()),
        Command::Synthesize {
            model,
            data,
            out,
            inference,
            sampling,
            stage,
        } => {
            apply_inference(&mut cfg, inference);
            if let Some(g) = inference.gamma {
                cfg.synthesis_gamma = Some(g);
            }
            if let Some(b) = inference.beta {
                cfg.synthesis_beta = Some(b);
            }
            apply_sampling(&mut cfg, sampling)?;
            cmd_synthesize(cfg, model, data, out, *stage)
        }
        Command::ToyCorpus {
            count,
            rate,
            rules,
            seed,
            out,
        } => cmd_toy_corpus(*count, *rate, rules, *seed, out),
    }
}

/// Process exit code for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
