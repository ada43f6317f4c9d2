use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biasforge::bridge::{emit_alignment_config, export_train, HParams};
use biasforge::client::{HandleConfig, ModelHandle};
use biasforge::io::{create_dir, load_dataset, save_dataset, write_json, write_jsonl};
use biasforge::orchestrator::{
    generate_completed, run_experiment, run_multi_round, verify_manifest, wrap_biographies,
    ExperimentConfig, Mitigation, Scope, Sources, Strategy,
};
use biasforge::resources::{load_abc_lexicon, load_catalog, load_mask_lexicon};
use biasforge::tasks::{self, Task, TaskOutput};
use biasforge::toy::{self, ToySizes};
use biasforge::{report, Error, Result};
use biasforge_core::batch::BatchOptions;
use biasforge_core::eval::{Divergence, Slicing};
use biasforge_core::mitigation::{AlignmentConfig, EmbeddingSource, PartitionRule};
use biasforge_core::mixer::{mix, BiasRatio, MixPlan, MixPolicy};
use biasforge_core::{Axis, BiasSpec, Culture, Dataset};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biasforge", version, about = "Bias-controlled synthetic data for fine-tuning experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// `mock`, `mock:<mode>` or an http(s) endpoint base.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Requests in flight at once.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Template catalog JSON replacing the bundled one.
    #[arg(long)]
    templates: Option<PathBuf>,
}

impl ModelArgs {
    fn apply(&self, mut h: HandleConfig, seed: Option<u64>) -> HandleConfig {
        if let Some(v) = &self.base_url {
            h.base_url = v.clone();
        }
        if let Some(v) = &self.model {
            h.model = v.clone();
        }
        if let Some(v) = self.temperature {
            h.temperature = v;
        }
        if let Some(v) = self.concurrency {
            h.max_concurrency = v;
        }
        if seed.is_some() {
            h.seed = seed;
        }
        h
    }

    fn handle(&self, seed: u64) -> Result<ModelHandle> {
        ModelHandle::new(self.apply(HandleConfig::default(), Some(seed)))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a generation batch and complete it with a model.
    Generate {
        #[arg(long)]
        axis: Axis,
        #[arg(long = "type")]
        type_id: u8,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Value questions (culture axis).
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        focus_culture: Option<Culture>,
        /// Also write classification records framed by these originals (gender axis).
        #[arg(long, requires = "wrapped_out")]
        frames: Option<PathBuf>,
        #[arg(long)]
        wrapped_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Mix original and augmented records at bias ratio γ.
    Mix {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        augmented: PathBuf,
        #[arg(long)]
        gamma: BiasRatio,
        #[arg(long, default_value = "replace")]
        policy: MixPolicy,
        #[arg(long)]
        total: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Token guard or mask a dataset, or emit a loss alignment config.
    Mitigate {
        #[arg(long)]
        strategy: StrategyArg,
        #[arg(long)]
        axis: Axis,
        #[arg(long = "in")]
        input: PathBuf,
        /// Dataset (token, mask) or alignment config (loss).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value = "augmented")]
        scope: ScopeArg,
        #[arg(long, default_value = "bridge")]
        embedding_source: SourceArg,
        #[arg(long)]
        mask_lexicon: Option<PathBuf>,
    },
    /// Write a training directory for the fine-tuning bridge.
    ExportTrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        axis: Axis,
        #[arg(long)]
        culture: Option<Culture>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Adds an alignment config with this λ.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<u32>,
    },
    /// Run one evaluation task against a model.
    Evaluate {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        axis: Axis,
        /// Directory in the `toy-data` layout. Default: toy data from `--seed`.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Dataset for `group_counts` and `embedding`.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        focus_culture: Option<Culture>,
        #[arg(long, default_value_t = 60)]
        hiring_trials: usize,
        #[arg(long, default_value_t = 5)]
        salary_per_cell: usize,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value = "total-variation")]
        divergence: DivergenceArg,
        #[arg(long)]
        abc_lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run a (bias type × γ) grid from a JSON config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run multi-round inheritance chains from a JSON config.
    Multiround {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Rebuild the consolidated report of a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Check every hash in a run manifest against the stored files.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// Write the synthetic stand-in corpora.
    ToyData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Token,
    Mask,
    Loss,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScopeArg {
    Augmented,
    All,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SourceArg {
    Endpoint,
    Bridge,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DivergenceArg {
    TotalVariation,
    JensenShannon,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn experiment(config: Option<&Path>, dry_run: bool, seed: Option<u64>, model: &ModelArgs) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.dry_run |= dry_run;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.generator = model.apply(cfg.generator, seed);
    if model.templates.is_some() {
        cfg.templates = model.templates.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate { axis, type_id, n, seed, sources, focus_culture, frames, wrapped_out, out, model } => {
            let catalog = load_catalog(model.templates.as_deref())?;
            let h = model.handle(seed)?;
            let src = sources.as_deref().map(load_dataset).transpose()?;
            let spec = BiasSpec::new(axis, type_id)?;
            let opts = BatchOptions { focus_culture, ..Default::default() };
            let d = generate_completed(&h, &catalog, spec, n, seed, 0, src.as_ref(), opts)?;
            save_dataset(&d, &out)?;
            if let (Some(f), Some(w)) = (frames, wrapped_out) {
                save_dataset(&wrap_biographies(&d, &load_dataset(&f)?, seed)?, &w)?;
            }
            println!("{} records -> {}", d.len(), out.display());
        }
        Cmd::Mix { original, augmented, gamma, policy, total, seed, out } => {
            let o = load_dataset(&original)?;
            let a = load_dataset(&augmented)?;
            let plan = MixPlan { gamma, total, policy, seed };
            let d = mix(&o, &a, &plan, vec![original.display().to_string(), augmented.display().to_string()])?;
            save_dataset(&d, &out)?;
            let c = d.manifest().counts;
            println!("{} original + {} augmented -> {}", c.original, c.augmented, out.display());
        }
        Cmd::Mitigate { strategy, axis, input, out, lambda, scope, embedding_source, mask_lexicon } => {
            let source = match embedding_source {
                SourceArg::Endpoint => EmbeddingSource::Endpoint,
                SourceArg::Bridge => EmbeddingSource::Bridge,
            };
            if let StrategyArg::Loss = strategy {
                let cfg = AlignmentConfig { lambda, embedding_source: source, partition: PartitionRule::Provenance };
                let spec = emit_alignment_config(&cfg, &input, &out)?;
                let counts: Vec<String> = spec.partition_counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
                println!("alignment config ({}) -> {}", counts.join(", "), out.display());
                return Ok(());
            }
            let m = Mitigation {
                strategy: match strategy {
                    StrategyArg::Token => Strategy::Token,
                    _ => Strategy::Mask,
                },
                lambda,
                scope: match scope {
                    ScopeArg::Augmented => Scope::Augmented,
                    ScopeArg::All => Scope::All,
                },
                embedding_source: source,
            };
            let d = m.apply(load_dataset(&input)?, axis, &load_mask_lexicon(mask_lexicon.as_deref())?)?;
            save_dataset(&d, &out)?;
            println!("{} records -> {}", d.len(), out.display());
        }
        Cmd::ExportTrain { input, out, axis, culture, seed, lambda, learning_rate, epochs } => {
            let d = load_dataset(&input)?;
            let mut hp = HParams::defaults(axis, culture, seed);
            if let Some(lr) = learning_rate {
                hp.learning_rate = lr;
            }
            if let Some(e) = epochs {
                hp.epochs = e;
            }
            let align = lambda.map(|lambda| AlignmentConfig { lambda, ..Default::default() });
            let e = export_train(&d, &out, &hp, align.as_ref())?;
            println!("{} records -> {}", d.len(), e.dir.display());
        }
        Cmd::Evaluate {
            task,
            axis,
            data_dir,
            input,
            focus_culture,
            hiring_trials,
            salary_per_cell,
            repeats,
            divergence,
            abc_lexicon,
            seed,
            out,
            model,
        } => {
            let catalog = load_catalog(model.templates.as_deref())?;
            let h = model.handle(seed)?;
            let sources = match &data_dir {
                Some(dir) => Sources::load(dir, axis)?.0,
                None => {
                    let tmp = out.join("inputs");
                    toy::write(&toy::generate(seed, ToySizes::default())?, &tmp)?;
                    Sources::load(&tmp, axis)?.0
                }
            };
            let need_input = || -> Result<Dataset> {
                let p = input.as_deref().ok_or_else(|| Error::Config(format!("{task} needs --in")))?;
                load_dataset(p)
            };
            let output = match task {
                Task::Classification => {
                    let slicing = if axis == Axis::Gender { Slicing::GENDER } else { Slicing::CULTURE };
                    tasks::classification(&h, sources.eval.records(), slicing)?
                }
                Task::Hiring => tasks::hiring(&h, &catalog, hiring_trials, seed)?,
                Task::Salary => tasks::salary(&h, &catalog, sources.eval.records(), salary_per_cell, seed)?,
                Task::Story => tasks::story(&h, &catalog, &load_abc_lexicon(abc_lexicon.as_deref())?, repeats)?,
                Task::GroupCounts => tasks::generated_group_counts(need_input()?.records()),
                Task::ValueQa => {
                    let qs = sources.questions.as_ref().ok_or_else(|| Error::Config("value_qa needs the culture axis".into()))?;
                    let human = sources.human.as_ref().expect("culture sources carry distributions");
                    let cultures = focus_culture.map_or_else(|| Culture::ALL.to_vec(), |c| vec![c]);
                    let div = match divergence {
                        DivergenceArg::TotalVariation => Divergence::TotalVariation,
                        DivergenceArg::JensenShannon => Divergence::JensenShannon,
                    };
                    tasks::value_qa(&h, &catalog, qs.records(), human, &cultures, repeats, div)?
                }
                Task::Embedding => {
                    let e = tasks::embedding(&h, need_input()?.records())?;
                    create_dir(&out)?;
                    if let Some(p) = &e.projection {
                        write_json(&out.join("projection.json"), p)?;
                    }
                    TaskOutput { report: e.report, responses: Vec::new() }
                }
            };
            create_dir(&out)?;
            write_json(&out.join(format!("{task}.json")), &output.report)?;
            if !output.responses.is_empty() {
                write_jsonl(&out.join(format!("{task}.responses.jsonl")), &output.responses)?;
            }
            for r in output.report.rows.iter().chain(&output.report.totals) {
                println!("{}\t{}\t{}\t{}", r.group.label(), r.metric, r.value, r.n);
            }
        }
        Cmd::Run { config, out, dry_run, seed, model } => {
            let cfg = experiment(config.as_deref(), dry_run, seed, &model)?;
            let m = run_experiment(&cfg, &out)?;
            summarize(&m.cells, &out);
        }
        Cmd::Multiround { config, out, rounds, dry_run, seed, model } => {
            let mut cfg = experiment(config.as_deref(), dry_run, seed, &model)?;
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            let m = run_multi_round(&cfg, &out)?;
            summarize(&m.cells, &out);
        }
        Cmd::Report { run } => {
            let s = report::write_report(&run)?;
            println!("{} completed, {} failed -> {}", s.completed, s.failed, run.join(report::REPORT_CSV).display());
        }
        Cmd::Verify { run } => {
            let bad = verify_manifest(&run)?;
            if !bad.is_empty() {
                return Err(Error::Config(format!("{} files differ from the manifest: {}", bad.len(), bad.join(", "))));
            }
            println!("manifest ok");
        }
        Cmd::ToyData { out, seed } => {
            let data = toy::generate(seed, ToySizes::default())?;
            toy::write(&data, &out)?;
            println!("{} gender and {} culture originals -> {}", data.gender_originals.len(), data.culture_originals.len(), out.display());
        }
    }
    Ok(())
}

fn summarize(cells: &[biasforge::orchestrator::CellSummary], out: &Path) {
    let failed: Vec<_> = cells.iter().filter(|c| c.error.is_some()).collect();
    println!("{} cells, {} failed -> {}", cells.len(), failed.len(), out.display());
    for c in failed {
        let e = c.error.as_ref().expect("failed cells carry an error");
        eprintln!("  {}: {} failed: {}", c.cell, e.stage, e.message);
    }
}
