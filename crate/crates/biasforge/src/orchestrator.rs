//! Experiment runner: grids over (bias type × γ), multi-round inheritance
//! chains, and the run directory.
//!
//! ```text
//! <run>/manifest.json                  config, cells, sha256 of every file
//! <run>/timings.json                   wall-clock times (not hashed)
//! <run>/datasets/inputs/               source data when none was supplied
//! <run>/datasets/<cell>/               generated, augmented, mixed
//! <run>/train_exports/<cell>/          train.jsonl, hparams.json, alignment.json
//! <run>/responses/<cell>/<task>.jsonl
//! <run>/embeddings/<cell>/
//! <run>/metrics/<cell>/cell.json, <task>.json
//! <run>/report.csv, report.json, plot_long.csv, trajectory.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use biasforge_core::batch::{build_generation_batch, BatchOptions};
use biasforge_core::catalog::{TemplateCatalog, CATALOG_VERSION};
use biasforge_core::eval::{AbcLexicon, Divergence, Slicing};
use biasforge_core::mitigation::{apply_mask, apply_token_guard, AlignmentConfig, EmbeddingSource, MaskLexicon, PartitionRule};
use biasforge_core::mixer::{mix, plan_counts, BiasRatio, MixCounts, MixPlan, MixPolicy};
use biasforge_core::render::culture_prefix;
use biasforge_core::sample::{derive_seed, SplitMix64, SAMPLER_VERSION};
use biasforge_core::{Axis, BiasSpec, Culture, Dataset, EmbeddingSet, Manifest, Profession, Profile, Provenance, Record};
use serde::{Deserialize, Serialize};

use crate::bridge::{export_train, verify_loss_log, BridgeConfig, HParams};
use crate::client::{parallel_map, HandleConfig, ModelHandle};
use crate::error::{Error, Result};
use crate::io::{create_dir, load_dataset, read_json, save_dataset, save_embeddings, sha256_file, write_json, write_jsonl};
use crate::resources::{load_abc_lexicon, load_catalog, load_mask_lexicon};
use crate::tasks::{self, quoted_text, Embedder, Task, TaskOutput};
use crate::toy::{self, HumanDistributions, ToySizes};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CELL_FILE: &str = "cell.json";
pub const GENDER_TOTAL: u64 = 3600;
pub const CULTURE_TOTAL: u64 = 2833;
/// Relative tolerance of the loss-log identity check.
pub const LOSS_LOG_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    None,
    Token,
    Mask,
    Loss,
}

/// Which records token guarding or masking touches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    Augmented,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mitigation {
    pub strategy: Strategy,
    pub lambda: f64,
    pub scope: Scope,
    /// Embedding source named in the alignment config.
    pub embedding_source: EmbeddingSource,
}

impl Default for Mitigation {
    fn default() -> Self {
        let a = AlignmentConfig::default();
        Mitigation { strategy: Strategy::None, lambda: a.lambda, scope: Scope::Augmented, embedding_source: a.embedding_source }
    }
}

impl Mitigation {
    pub fn alignment(&self) -> Option<AlignmentConfig> {
        (self.strategy == Strategy::Loss).then_some(AlignmentConfig {
            lambda: self.lambda,
            embedding_source: self.embedding_source,
            partition: PartitionRule::Provenance,
        })
    }

    /// Token guard or mask over `d`; loss and none leave records untouched.
    pub fn apply(&self, d: Dataset, axis: Axis, mask: &MaskLexicon) -> Result<Dataset> {
        let touch = |r: &Record| self.scope == Scope::All || r.provenance == Provenance::Augmented;
        let manifest = d.manifest().clone().with_param("mitigation", format!("{:?}", self.strategy).to_lowercase());
        let out = match self.strategy {
            Strategy::None | Strategy::Loss => return Ok(d),
            Strategy::Token => d.map_records(manifest, |r| if touch(&r) { apply_token_guard(r) } else { Ok(r) })?,
            Strategy::Mask => d.map_records(manifest, |r| Ok(if touch(&r) { apply_mask(r, mask, axis) } else { r }))?,
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub axis: Axis,
    /// Default: 0..=6 on the gender axis, 1..=6 on the culture axis; `[0]` for multi-round.
    pub bias_types: Option<Vec<u8>>,
    /// Default: 0, 0.05, 0.10, 0.20, 0.50; `[0.5]` for multi-round.
    pub gammas: Option<Vec<BiasRatio>>,
    pub policy: MixPolicy,
    /// Replace-policy total. Default: 3600 gender, 2833 culture.
    pub total: Option<u64>,
    pub seed: u64,
    pub generator: HandleConfig,
    /// Template for the handles of fine-tuned checkpoints. Default: the generator's.
    pub evaluatee: Option<HandleConfig>,
    pub mitigation: Mitigation,
    pub rounds: u32,
    /// Default: every task that applies to the axis.
    pub tasks: Option<Vec<Task>>,
    /// Culture axis: the culture being fine-tuned for.
    pub focus_culture: Option<Culture>,
    /// Directory laid out like `toy-data` output. Default: synthetic toy data.
    pub data_dir: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub abc_lexicon: Option<PathBuf>,
    pub mask_lexicon: Option<PathBuf>,
    pub hiring_trials: usize,
    pub salary_per_cell: usize,
    pub story_repeats: usize,
    pub value_repeats: usize,
    pub divergence: Divergence,
    /// Vectors for the embedding task.
    pub embedding_source: EmbeddingSource,
    pub bridge: Option<BridgeConfig>,
    pub dry_run: bool,
    pub cell_concurrency: usize,
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            axis: Axis::Gender,
            bias_types: None,
            gammas: None,
            policy: MixPolicy::Replace,
            total: None,
            seed: 0,
            generator: HandleConfig::default(),
            evaluatee: None,
            mitigation: Mitigation::default(),
            rounds: 1,
            tasks: None,
            focus_culture: None,
            data_dir: None,
            templates: None,
            abc_lexicon: None,
            mask_lexicon: None,
            hiring_trials: 60,
            salary_per_cell: 5,
            story_repeats: 1,
            value_repeats: 5,
            divergence: Divergence::default(),
            embedding_source: EmbeddingSource::Endpoint,
            bridge: None,
            dry_run: false,
            cell_concurrency: 1,
            record_timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn default_total(axis: Axis) -> u64 {
        match axis {
            Axis::Gender => GENDER_TOTAL,
            Axis::Culture => CULTURE_TOTAL,
        }
    }

    pub fn resolved_total(&self) -> u64 {
        self.total.unwrap_or(Self::default_total(self.axis))
    }

    pub fn resolved_types(&self, multi_round: bool) -> Vec<u8> {
        match (&self.bias_types, multi_round, self.axis) {
            (Some(t), _, _) => t.clone(),
            (None, true, _) => vec![0],
            (None, false, Axis::Gender) => (0..=6).collect(),
            (None, false, Axis::Culture) => (1..=6).collect(),
        }
    }

    pub fn resolved_gammas(&self, multi_round: bool) -> Vec<BiasRatio> {
        match (&self.gammas, multi_round) {
            (Some(g), _) => g.clone(),
            (None, true) => vec![BiasRatio::new(1, 2).expect("1/2 is a valid ratio")],
            (None, false) => BiasRatio::standard_grid().to_vec(),
        }
    }

    pub fn resolved_tasks(&self) -> Vec<Task> {
        self.tasks.clone().unwrap_or_else(|| default_tasks(self.axis).to_vec())
    }

    pub fn validate(&self, multi_round: bool) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if !self.dry_run && self.bridge.is_none() {
            return bad("fine-tuning needs a `bridge` command; set `dry_run` to skip it".into());
        }
        let types = self.resolved_types(multi_round);
        if types.is_empty() || self.resolved_gammas(multi_round).is_empty() {
            return bad("bias_types and gammas must not be empty".into());
        }
        for t in types {
            BiasSpec::new(self.axis, t)?;
        }
        for t in self.resolved_tasks() {
            if !default_tasks(self.axis).contains(&t) {
                return bad(format!("task {t} does not apply to the {} axis", self.axis));
            }
        }
        if self.axis == Axis::Gender && self.focus_culture.is_some() {
            return bad("focus_culture applies to the culture axis only".into());
        }
        let m = &self.mitigation;
        if !m.lambda.is_finite() || m.lambda < 0.0 {
            return bad(format!("lambda must be finite and >= 0, got {}", m.lambda));
        }
        if m.strategy == Strategy::Token && m.scope == Scope::All {
            return bad("the token guard applies to augmented records only".into());
        }
        if self.embedding_source == EmbeddingSource::Bridge && self.dry_run && self.resolved_tasks().contains(&Task::Embedding) {
            return bad("bridge embeddings need a fine-tuned checkpoint; use the endpoint source for dry runs".into());
        }
        if self.cell_concurrency == 0 {
            return bad("cell_concurrency must be at least 1".into());
        }
        ModelHandle::new(self.generator.clone())?;
        if let Some(e) = &self.evaluatee {
            ModelHandle::new(e.clone())?;
        }
        Ok(())
    }
}

pub fn default_tasks(axis: Axis) -> &'static [Task] {
    match axis {
        Axis::Gender => &[Task::Classification, Task::Hiring, Task::Salary, Task::Story, Task::GroupCounts, Task::Embedding],
        Axis::Culture => &[Task::Classification, Task::ValueQa, Task::Embedding],
    }
}

/// Grid coordinates of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellKey {
    pub bias_type: u8,
    pub gamma: BiasRatio,
    pub round: u32,
}

impl CellKey {
    /// `t1_g0.05_r0`; fractional ratios use `-` for `/`.
    pub fn id(&self) -> String {
        format!("t{}_g{}_r{}", self.bias_type, self.gamma.to_string().replace('/', "-"), self.round)
    }
}

/// Source data for one axis.
#[derive(Debug, Clone)]
pub struct Sources {
    /// Training-format originals; culture prompts carry their descriptor.
    pub originals: Dataset,
    /// Held-out classification set.
    pub eval: Dataset,
    /// Culture axis: unprefixed value questions.
    pub questions: Option<Dataset>,
    pub human: Option<HumanDistributions>,
    /// Where the originals were read from, as recorded in dataset manifests.
    pub originals_label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl Sources {
    /// Reads `dir` (the `toy-data` layout) for `axis`.
    pub fn load(dir: &Path, axis: Axis) -> Result<(Sources, Vec<PathBuf>)> {
        let p = |f: &str| dir.join(f);
        match axis {
            Axis::Gender => {
                let files = vec![p(toy::GENDER_ORIGINALS), p(toy::GENDER_EVAL)];
                let s = Sources {
                    originals: load_dataset(&files[0])?,
                    eval: load_dataset(&files[1])?,
                    questions: None,
                    human: None,
                    originals_label: files[0].display().to_string(),
                };
                Ok((s, files))
            }
            Axis::Culture => {
                let files =
                    vec![p(toy::CULTURE_ORIGINALS), p(toy::CULTURE_EVAL), p(toy::VALUE_QUESTIONS), p(toy::HUMAN_DISTRIBUTIONS)];
                let s = Sources {
                    originals: load_dataset(&files[0])?,
                    eval: load_dataset(&files[1])?,
                    questions: Some(load_dataset(&files[2])?),
                    human: Some(read_json(&files[3])?),
                    originals_label: files[0].display().to_string(),
                };
                Ok((s, files))
            }
        }
    }
}

/// Culture-axis originals with the type-1 descriptor of their culture
/// prepended, optionally restricted to one culture.
pub fn prefix_culture_originals(catalog: &TemplateCatalog, d: &Dataset, focus: Option<Culture>) -> Result<Dataset> {
    let mut out = Vec::new();
    for r in d.records() {
        let c = r.groups.culture.ok_or_else(|| Error::Config(format!("culture original {:?} has no culture", r.id)))?;
        if focus.is_some_and(|f| f != c) {
            continue;
        }
        let mut r = r.clone();
        r.prompt = format!("{}\n\n{}", culture_prefix(catalog, &Profile::default().with_culture(c))?, r.prompt);
        out.push(r);
    }
    let mut m = d.manifest().clone().with_param("culture_prefix", "type1");
    if let Some(f) = focus {
        m = m.with_param("focus_culture", f.as_str());
    }
    Ok(Dataset::new(out, m)?)
}

/// Generates `n` records for `spec` and fills in their completions.
#[allow(clippy::too_many_arguments)]
pub fn generate_completed(
    h: &ModelHandle,
    catalog: &TemplateCatalog,
    spec: BiasSpec,
    n: usize,
    seed: u64,
    round: u32,
    sources: Option<&Dataset>,
    opts: BatchOptions,
) -> Result<Dataset> {
    let mut records = build_generation_batch(catalog, spec, n, seed, sources, opts)?;
    let prompts: Vec<String> = records.iter().map(|r| r.prompt.clone()).collect();
    for (r, c) in records.iter_mut().zip(h.chat_batch(&prompts)?) {
        r.completion = Some(c);
        r.round = round;
    }
    let m = Manifest::new("generate")
        .with_seed(seed)
        .with_param("axis", spec.axis().as_str())
        .with_param("type_id", spec.type_id().to_string())
        .with_param("model", format!("{}:{}", h.config().base_url, h.config().model));
    Ok(Dataset::new(records, m)?)
}

/// Turns generated biographies into classification records by placing
/// each one in the question of an original with the same profession.
/// Biographies without a profession take the frame's label.
pub fn wrap_biographies(generated: &Dataset, frames: &Dataset, seed: u64) -> Result<Dataset> {
    let usable: Vec<&Record> = frames.records().iter().filter(|r| r.completion.is_some() && r.prompt.contains('"')).collect();
    if usable.is_empty() && !generated.is_empty() {
        return Err(Error::Config("no quoted original records to frame generated biographies".into()));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, 0x7772_6170));
    let mut out = Vec::with_capacity(generated.len());
    for g in generated.records() {
        let bio = g.completion.as_deref().ok_or_else(|| Error::Config(format!("generated record {:?} has no completion", g.id)))?;
        let same: Vec<&Record> = match g.groups.profession {
            Some(p) => usable.iter().copied().filter(|r| r.groups.profession == Some(p)).collect(),
            None => Vec::new(),
        };
        let pool = if same.is_empty() { &usable } else { &same };
        let frame = pool[rng.below(pool.len() as u64) as usize];
        let inner = quoted_text(&frame.prompt);
        let start = frame.prompt.find('"').expect("frame is quoted") + 1;
        let mut prompt = String::with_capacity(frame.prompt.len() + bio.len());
        prompt.push_str(&frame.prompt[..start]);
        prompt.push_str(bio.trim());
        prompt.push_str(&frame.prompt[start + inner.len()..]);
        let label = frame.completion.clone().expect("usable frames have labels");
        let mut r = g.clone();
        r.prompt = prompt;
        r.task_tag = frame.task_tag.clone();
        if r.groups.profession.is_none() {
            r.groups.profession = label.parse::<Profession>().ok();
        }
        r.completion = Some(label);
        out.push(r);
    }
    let m = Manifest::new("wrap_biographies").with_seed(seed).with_inputs(generated.manifest().inputs.clone());
    Ok(Dataset::new(out, m)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelId {
    pub base_url: String,
    pub model: String,
}

impl From<&HandleConfig> for ModelId {
    fn from(h: &HandleConfig) -> Self {
        ModelId { base_url: h.base_url.clone(), model: h.model.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub stage: String,
    pub message: String,
}

/// `metrics/<cell>/cell.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub axis: Axis,
    pub bias_type: u8,
    pub gamma: BiasRatio,
    pub round: u32,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<CellError>,
    pub seed: u64,
    pub policy: MixPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<MixCounts>,
    pub mitigation: Strategy,
    pub generator: ModelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluatee: Option<ModelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_source: Option<String>,
    pub tasks: Vec<Task>,
}

/// `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub sampler_version: String,
    pub catalog_version: String,
    pub multi_round: bool,
    pub config: ExperimentConfig,
    pub inputs: Vec<InputFile>,
    pub cells: Vec<CellSummary>,
    /// Relative path → sha256 of every file under the run directory except
    /// this manifest and the timings file.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Timings {
    started_unix: u64,
    finished_unix: u64,
    cells: BTreeMap<String, f64>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    root: PathBuf,
    catalog: TemplateCatalog,
    abc: AbcLexicon,
    mask: MaskLexicon,
    sources: Sources,
}

struct CellRun {
    summary: CellSummary,
    /// Handle of the fine-tuned checkpoint, for the next round.
    next: Option<HandleConfig>,
    secs: f64,
}

struct BridgeEmbedder<'a> {
    bridge: &'a BridgeConfig,
    checkpoint: String,
    work: PathBuf,
}

impl Embedder for BridgeEmbedder<'_> {
    fn source(&self) -> String {
        format!("bridge:{}", self.checkpoint)
    }

    fn embed(&self, ids: &[String], texts: &[String], provenance: Provenance) -> Result<EmbeddingSet> {
        let set = self.bridge.extract_embeddings(&self.checkpoint, ids, texts, &self.work, provenance.as_str())?;
        if set.source() != provenance {
            return Err(Error::Bridge(format!("bridge returned {} vectors for {provenance} texts", set.source())));
        }
        Ok(set)
    }
}

fn stage<T, E: std::fmt::Display>(name: &str, r: std::result::Result<T, E>) -> std::result::Result<T, CellError> {
    r.map_err(|e| CellError { stage: name.into(), message: e.to_string() })
}

impl Runner<'_> {
    fn dir(&self, kind: &str, cell: &str) -> PathBuf {
        self.root.join(kind).join(cell)
    }

    fn spec(&self, t: u8) -> Result<BiasSpec> {
        Ok(BiasSpec::new(self.cfg.axis, t)?)
    }

    fn run_cell(&self, key: CellKey, generator: &HandleConfig) -> CellRun {
        let start = Instant::now();
        let cell = key.id();
        let cfg = self.cfg;
        let mut summary = CellSummary {
            cell: cell.clone(),
            axis: cfg.axis,
            bias_type: key.bias_type,
            gamma: key.gamma,
            round: key.round,
            status: CellStatus::Ok,
            error: None,
            seed: cfg.seed ^ key.round as u64,
            policy: cfg.policy,
            counts: None,
            mitigation: cfg.mitigation.strategy,
            generator: generator.into(),
            evaluatee: None,
            checkpoint: None,
            embedding_source: None,
            tasks: Vec::new(),
        };
        let next = match self.cell_stages(key, generator, &mut summary) {
            Ok(next) => next,
            Err(e) => {
                log::error!("cell {cell} failed in {}: {}", e.stage, e.message);
                summary.status = CellStatus::Failed;
                summary.error = Some(e);
                None
            }
        };
        let path = self.dir("metrics", &cell).join(CELL_FILE);
        if let Err(e) = create_dir(path.parent().expect("cell dir")).and_then(|_| write_json(&path, &summary)) {
            log::error!("cannot write {}: {e}", path.display());
        }
        CellRun { summary, next, secs: start.elapsed().as_secs_f64() }
    }

    fn cell_stages(
        &self,
        key: CellKey,
        generator: &HandleConfig,
        summary: &mut CellSummary,
    ) -> std::result::Result<Option<HandleConfig>, CellError> {
        let cfg = self.cfg;
        let cell = key.id();
        let seed = summary.seed;
        let spec = stage("config", self.spec(key.bias_type))?;
        let gen = stage("config", ModelHandle::new(generator.clone()))?;
        let data_dir = self.dir("datasets", &cell);
        stage("write", create_dir(&data_dir))?;

        let total = match cfg.policy {
            MixPolicy::Replace => Some(cfg.resolved_total()),
            MixPolicy::Append => None,
        };
        let plan = MixPlan { gamma: key.gamma, total, policy: cfg.policy, seed };
        let originals = &self.sources.originals;
        let counts = stage("mix", plan_counts(&plan, originals.len() as u64, u64::MAX))?;
        summary.counts = Some(counts);

        let opts = BatchOptions { focus_culture: cfg.focus_culture, ..Default::default() };
        let generated = stage(
            "generate",
            generate_completed(&gen, &self.catalog, spec, counts.n_augmented as usize, seed, key.round, self.sources.questions.as_ref(), opts),
        )?;
        stage("write", save_dataset(&generated, &data_dir.join("generated.jsonl")))?;
        let augmented = match cfg.axis {
            Axis::Gender => stage("wrap", wrap_biographies(&generated, originals, seed))?,
            Axis::Culture => generated.clone(),
        };
        stage("write", save_dataset(&augmented, &data_dir.join("augmented.jsonl")))?;

        let inputs = vec![self.sources.originals_label.clone(), format!("datasets/{cell}/augmented.jsonl")];
        let mixed = stage("mix", mix(originals, &augmented, &plan, inputs))?;
        let m = mixed.manifest().clone();
        let mixed = stage(
            "mix",
            mixed.map_records(m, |mut r| {
                r.round = key.round;
                Ok(r)
            }),
        )?;
        stage("write", save_dataset(&mixed, &data_dir.join("mixed.jsonl")))?;

        let train = stage("mitigate", cfg.mitigation.apply(mixed, cfg.axis, &self.mask))?;
        let hp = HParams::defaults(cfg.axis, cfg.focus_culture, seed);
        let align = cfg.mitigation.alignment();
        let export = stage("export", export_train(&train, &self.dir("train_exports", &cell), &hp, align.as_ref()))?;

        let template = cfg.evaluatee.as_ref().unwrap_or(&cfg.generator);
        let (eval_cfg, checkpoint) = if cfg.dry_run {
            (generator.clone(), None)
        } else {
            let bridge = cfg.bridge.as_ref().expect("validated");
            let id = format!("{cell}-{seed:016x}");
            let registry = export.dir.join("registry.json");
            let entry = stage("finetune", bridge.finetune(&export, &id, &registry))?;
            if let Some(log) = &entry.loss_log {
                let log = if log.is_relative() { export.dir.join(log) } else { log.clone() };
                stage("finetune", verify_loss_log(&log, LOSS_LOG_TOLERANCE))?;
            }
            (entry.handle(template), Some(id))
        };
        summary.evaluatee = Some((&eval_cfg).into());
        summary.checkpoint = checkpoint.clone();
        let eval = stage("evaluate", ModelHandle::new(eval_cfg.clone()))?;

        let resp_dir = self.dir("responses", &cell);
        let metrics_dir = self.dir("metrics", &cell);
        stage("write", create_dir(&resp_dir).and_then(|_| create_dir(&metrics_dir)))?;
        for task in cfg.resolved_tasks() {
            let name = task.as_str();
            let out = match task {
                Task::Embedding => {
                    let emb_dir = self.dir("embeddings", &cell);
                    stage("write", create_dir(&emb_dir))?;
                    let bridge_embedder;
                    let embedder: &dyn Embedder = match (cfg.embedding_source, &checkpoint) {
                        (EmbeddingSource::Bridge, Some(id)) => {
                            bridge_embedder = BridgeEmbedder {
                                bridge: cfg.bridge.as_ref().expect("validated"),
                                checkpoint: id.clone(),
                                work: emb_dir.clone(),
                            };
                            &bridge_embedder
                        }
                        _ => &eval,
                    };
                    summary.embedding_source = Some(embedder.source());
                    let e = stage(name, tasks::embedding(embedder, train.records()))?;
                    for set in &e.sets {
                        stage("write", save_embeddings(set, &emb_dir.join(format!("{}.json", set.source()))))?;
                    }
                    if let Some(p) = &e.projection {
                        stage("write", write_json(&emb_dir.join("projection.json"), p))?;
                    }
                    TaskOutput { report: e.report, responses: Vec::new() }
                }
                _ => stage(name, self.run_task(task, &eval, &generated, cfg.seed))?,
            };
            stage(name, out.report.check())?;
            if !out.responses.is_empty() {
                stage("write", write_jsonl(&resp_dir.join(format!("{name}.jsonl")), &out.responses))?;
            }
            stage("write", write_json(&metrics_dir.join(format!("{name}.json")), &out.report))?;
            summary.tasks.push(task);
        }
        Ok(checkpoint.map(|_| eval_cfg))
    }

    fn run_task(&self, task: Task, h: &ModelHandle, generated: &Dataset, seed: u64) -> Result<TaskOutput> {
        let cfg = self.cfg;
        let eval = self.sources.eval.records();
        match task {
            Task::Classification => {
                let slicing = match cfg.axis {
                    Axis::Gender => Slicing::GENDER,
                    Axis::Culture => Slicing::CULTURE,
                };
                tasks::classification(h, eval, slicing)
            }
            Task::Hiring => tasks::hiring(h, &self.catalog, cfg.hiring_trials, seed),
            Task::Salary => tasks::salary(h, &self.catalog, eval, cfg.salary_per_cell, seed),
            Task::Story => tasks::story(h, &self.catalog, &self.abc, cfg.story_repeats),
            Task::GroupCounts => Ok(tasks::generated_group_counts(generated.records())),
            Task::ValueQa => {
                let qs = self.sources.questions.as_ref().ok_or_else(|| Error::Config("value_qa needs value questions".into()))?;
                let human = self.sources.human.as_ref().ok_or_else(|| Error::Config("value_qa needs human distributions".into()))?;
                let cultures: Vec<Culture> = match cfg.focus_culture {
                    Some(c) => vec![c],
                    None => Culture::ALL.to_vec(),
                };
                tasks::value_qa(h, &self.catalog, qs.records(), human, &cultures, cfg.value_repeats, cfg.divergence)
            }
            Task::Embedding => unreachable!("handled by the caller"),
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn prepare<'a>(cfg: &'a ExperimentConfig, root: &Path) -> Result<(Runner<'a>, Vec<InputFile>)> {
    create_dir(root)?;
    let catalog = load_catalog(cfg.templates.as_deref())?;
    let abc = load_abc_lexicon(cfg.abc_lexicon.as_deref())?;
    let mask = load_mask_lexicon(cfg.mask_lexicon.as_deref())?;
    let mut inputs = Vec::new();
    for p in [&cfg.templates, &cfg.abc_lexicon, &cfg.mask_lexicon].into_iter().flatten() {
        inputs.push(InputFile { path: p.display().to_string(), sha256: sha256_file(p)? });
    }
    let mut sources = match &cfg.data_dir {
        Some(dir) => {
            let (s, files) = Sources::load(dir, cfg.axis)?;
            for f in files {
                inputs.push(InputFile { path: f.display().to_string(), sha256: sha256_file(&f)? });
            }
            s
        }
        None => {
            let dir = root.join("datasets").join("inputs");
            toy::write(&toy::generate(cfg.seed, ToySizes::default())?, &dir)?;
            let mut s = Sources::load(&dir, cfg.axis)?.0;
            let name = match cfg.axis {
                Axis::Gender => toy::GENDER_ORIGINALS,
                Axis::Culture => toy::CULTURE_ORIGINALS,
            };
            s.originals_label = format!("datasets/inputs/{name}");
            s
        }
    };
    if cfg.axis == Axis::Culture {
        sources.originals = prefix_culture_originals(&catalog, &sources.originals, cfg.focus_culture)?;
    }
    Ok((Runner { cfg, root: root.to_path_buf(), catalog, abc, mask, sources }, inputs))
}

fn finish(runner: &Runner, inputs: Vec<InputFile>, runs: Vec<CellRun>, started: u64, multi_round: bool) -> Result<RunManifest> {
    let cfg = runner.cfg;
    let root = &runner.root;
    write_json(&root.join(CONFIG_FILE), cfg)?;
    if runs.iter().any(|r| r.summary.status == CellStatus::Ok) {
        crate::report::write_report(root)?;
        if multi_round {
            crate::report::write_trajectory(root)?;
        }
    }
    if cfg.record_timings {
        let t = Timings {
            started_unix: started,
            finished_unix: unix_now(),
            cells: runs.iter().map(|r| (r.summary.cell.clone(), r.secs)).collect(),
        };
        write_json(&root.join(TIMINGS_FILE), &t)?;
    }
    let manifest = RunManifest {
        tool: format!("biasforge {}", env!("CARGO_PKG_VERSION")),
        sampler_version: SAMPLER_VERSION.into(),
        catalog_version: CATALOG_VERSION.into(),
        multi_round,
        config: cfg.clone(),
        inputs,
        cells: runs.into_iter().map(|r| r.summary).collect(),
        files: hash_tree(root)?,
    };
    write_json(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Runs every (bias type × γ) cell of `cfg` into `root`. Failed cells are
/// recorded in their `cell.json` and the manifest; the grid continues.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<RunManifest> {
    cfg.validate(false)?;
    let started = unix_now();
    let (runner, inputs) = prepare(cfg, root)?;
    let mut keys = Vec::new();
    for t in cfg.resolved_types(false) {
        for g in cfg.resolved_gammas(false) {
            keys.push(CellKey { bias_type: t, gamma: g, round: 0 });
        }
    }
    let runs = parallel_map(&keys, cfg.cell_concurrency.min(keys.len()), |k| Ok(runner.run_cell(*k, &cfg.generator)))?;
    finish(&runner, inputs, runs, started, false)
}

/// Runs `cfg.rounds` rounds per (bias type × γ) chain. Round `r` mixes with
/// seed `seed ^ r` and generates with the checkpoint fine-tuned in round
/// `r − 1` (the base generator in round 0 and in dry runs). A failed round
/// ends its chain.
pub fn run_multi_round(cfg: &ExperimentConfig, root: &Path) -> Result<RunManifest> {
    cfg.validate(true)?;
    let started = unix_now();
    let (runner, inputs) = prepare(cfg, root)?;
    let mut chains = Vec::new();
    for t in cfg.resolved_types(true) {
        for g in cfg.resolved_gammas(true) {
            chains.push((t, g));
        }
    }
    let per_chain = parallel_map(&chains, cfg.cell_concurrency.min(chains.len()), |&(t, g)| {
        let mut handle = cfg.generator.clone();
        let mut runs = Vec::new();
        for round in 0..cfg.rounds {
            let run = runner.run_cell(CellKey { bias_type: t, gamma: g, round }, &handle);
            let failed = run.summary.status == CellStatus::Failed;
            if let Some(next) = &run.next {
                handle = next.clone();
            }
            runs.push(run);
            if failed {
                break;
            }
        }
        Ok(runs)
    })?;
    finish(&runner, inputs, per_chain.into_iter().flatten().collect(), started, true)
}

/// Relative path (with `/`) → sha256 for every file under `root` except the
/// manifest and timings files.
pub fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
            .collect::<Result<_>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, root, out)?;
                continue;
            }
            let rel: Vec<String> =
                p.strip_prefix(root).expect("under root").components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            let rel = rel.join("/");
            if rel != MANIFEST_FILE && rel != TIMINGS_FILE {
                out.insert(rel, sha256_file(&p)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

/// Paths whose stored hash no longer matches, or that are missing or unlisted.
pub fn verify_manifest(root: &Path) -> Result<Vec<String>> {
    let m: RunManifest = read_json(&root.join(MANIFEST_FILE))?;
    let now = hash_tree(root)?;
    let mut bad: Vec<String> =
        m.files.iter().filter(|(p, h)| now.get(*p) != Some(*h)).map(|(p, _)| p.clone()).collect();
    bad.extend(now.keys().filter(|p| !m.files.contains_key(*p)).cloned());
    bad.sort();
    Ok(bad)
}
