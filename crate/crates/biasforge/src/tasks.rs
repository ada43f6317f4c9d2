//! Downstream evaluation tasks: prompt a model, parse its answers, score
//! them with the core metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use biasforge_core::batch::ValueQuestion;
use biasforge_core::catalog::TemplateCatalog;
use biasforge_core::eval::hiring::{sample_candidates, tally_hiring_trials};
use biasforge_core::eval::{
    adjective_rates, embedding_distance, group_counts, grouped_accuracy, project3, salary_report, value_misalignment,
    AbcLexicon, Divergence, EvalReport, GroupKey, Prediction, Projection, Row, SalaryResponse, Slicing, Story, ValueAnswer,
};
use biasforge_core::mitigation::{compute_alignment_loss, embedded_text};
use biasforge_core::render::{culture_prefix, render_task_prompt, TaskArgs};
use biasforge_core::sample::{derive_seed, seeded_sample, SplitMix64};
use biasforge_core::text::find_word;
use biasforge_core::{names, Culture, EmbeddingSet, Gender, Profession, Profile, Provenance, Record};
use serde::{Deserialize, Serialize};

use crate::client::ModelHandle;
use crate::error::{Error, Result};
use crate::toy::HumanDistributions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Hiring,
    Salary,
    Story,
    ValueQa,
    GroupCounts,
    Embedding,
}

impl Task {
    pub const ALL: [Task; 7] =
        [Task::Classification, Task::Hiring, Task::Salary, Task::Story, Task::ValueQa, Task::GroupCounts, Task::Embedding];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Hiring => "hiring",
            Task::Salary => "salary",
            Task::Story => "story",
            Task::ValueQa => "value_qa",
            Task::GroupCounts => "group_counts",
            Task::Embedding => "embedding",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// One prompt and the model's answer, as stored under `responses/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub prompt: String,
    pub response: String,
    #[serde(default)]
    pub groups: Profile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutput {
    pub report: EvalReport,
    pub responses: Vec<Response>,
}

fn ask(h: &ModelHandle, items: Vec<(String, String, Profile)>) -> Result<Vec<Response>> {
    let prompts: Vec<String> = items.iter().map(|(_, p, _)| p.clone()).collect();
    let answers = h.chat_batch(&prompts)?;
    Ok(items
        .into_iter()
        .zip(answers)
        .map(|((id, prompt, groups), response)| Response { id, prompt, response, groups })
        .collect())
}

/// Labels listed on an `Answer with one of: a, b, c.` line.
pub fn answer_labels(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix("Answer with one of:"))
        .map(|list| {
            list.trim().trim_end_matches('.').split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect()
        })
        .unwrap_or_default()
}

/// The label named earliest in `response`, preferring longer labels at the
/// same offset; the trimmed lowercase response when none is named.
pub fn parse_label(response: &str, labels: &[String]) -> String {
    labels
        .iter()
        .filter_map(|l| find_word(response, l).map(|i| (i, std::cmp::Reverse(l.len()), l)))
        .min()
        .map(|(_, _, l)| l.clone())
        .unwrap_or_else(|| response.trim().trim_end_matches('.').to_lowercase())
}

/// Accuracy and macro F1 of `records` (prompt → gold completion).
pub fn classification(h: &ModelHandle, records: &[Record], slicing: Slicing) -> Result<TaskOutput> {
    let items = records.iter().map(|r| (r.id.clone(), r.prompt.clone(), r.groups.clone())).collect();
    let responses = ask(h, items)?;
    let preds: Vec<Prediction> = records
        .iter()
        .zip(&responses)
        .map(|(r, resp)| {
            let labels = answer_labels(&r.prompt);
            Ok(Prediction {
                gold: r.completion.clone().ok_or_else(|| Error::Config(format!("record {:?} has no gold label", r.id)))?.to_lowercase(),
                pred: parse_label(&resp.response, &labels),
                groups: r.groups.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TaskOutput { report: grouped_accuracy(&preds, slicing)?, responses })
}

/// `trials` hiring prompts per profession, each with a fresh candidate list.
pub fn hiring(h: &ModelHandle, catalog: &TemplateCatalog, trials: usize, seed: u64) -> Result<TaskOutput> {
    let mut rng = SplitMix64::new(derive_seed(seed, 0x6869_7265));
    let mut items = Vec::new();
    let mut lists = Vec::new();
    for &p in Profession::ALL {
        for k in 0..trials {
            let cands = sample_candidates(&mut rng);
            let names: Vec<&str> = cands.iter().map(|c| c.name.as_str()).collect();
            let prompt = render_task_prompt(catalog, TaskArgs::Hiring { profession: p, candidates: &names })?;
            items.push((format!("hiring-{}-{k:03}", p.as_str().replace(' ', "_")), prompt, Profile::default().with_profession(p)));
            lists.push(cands);
        }
    }
    let responses = ask(h, items)?;
    let trials: Vec<(&str, _)> = responses.iter().map(|r| r.response.as_str()).zip(lists).collect();
    let mut report = tally_hiring_trials(&trials)?;
    report.meta.insert("trials_per_profession".into(), trials.len().checked_div(Profession::ALL.len()).unwrap_or(0).to_string());
    Ok(TaskOutput { report, responses })
}

/// The text between the first and last double quote, or the whole prompt.
pub fn quoted_text(prompt: &str) -> &str {
    match (prompt.find('"'), prompt.rfind('"')) {
        (Some(a), Some(b)) if b > a => &prompt[a + 1..b],
        _ => prompt,
    }
}

/// Salary recommendations for `per_cell` biographies of each (profession, gender).
pub fn salary(h: &ModelHandle, catalog: &TemplateCatalog, bios: &[Record], per_cell: usize, seed: u64) -> Result<TaskOutput> {
    let mut items = Vec::new();
    for &p in Profession::ALL {
        for &g in Gender::ALL {
            let cell: Vec<&Record> =
                bios.iter().filter(|r| r.groups.profession == Some(p) && r.groups.gender == Some(g)).collect();
            let k = per_cell.min(cell.len());
            for r in seeded_sample(&cell, k, derive_seed(seed, 0x5a1a_0000 + (p as u64) * 2 + g as u64))? {
                let prompt =
                    render_task_prompt(catalog, TaskArgs::Salary { position: p.as_str(), biography: quoted_text(&r.prompt) })?;
                let groups = Profile::default().with_gender(g).with_profession(p);
                items.push((format!("salary-{}", r.id), prompt, groups));
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Config("salary task needs labelled biographies".into()));
    }
    let responses = ask(h, items)?;
    let rows: Vec<SalaryResponse> =
        responses.iter().map(|r| SalaryResponse { response: r.response.clone(), groups: r.groups.clone() }).collect();
    Ok(TaskOutput { report: salary_report(&rows)?, responses })
}

/// `repeats` stories for every pooled name, labelled with the pool's group.
pub fn story(h: &ModelHandle, catalog: &TemplateCatalog, lex: &AbcLexicon, repeats: usize) -> Result<TaskOutput> {
    let mut items = Vec::new();
    for (c, g) in names::keys() {
        for &name in names::pool(c, g) {
            let prompt = render_task_prompt(catalog, TaskArgs::Story { name })?;
            for k in 0..repeats {
                items.push((format!("story-{c}-{g}-{name}-{k:02}"), prompt.clone(), Profile::default().with_culture(c).with_gender(g)));
            }
        }
    }
    let responses = ask(h, items)?;
    let stories: Vec<Story> = responses.iter().map(|r| Story { text: r.response.clone(), groups: r.groups.clone() }).collect();
    Ok(TaskOutput { report: adjective_rates(&stories, lex, Slicing::CULTURE_GENDER)?, responses })
}

/// Option index named by a response: a `(X)` marker, a bare letter, or
/// the text of an option.
pub fn parse_option(response: &str, options: &[&str]) -> Option<usize> {
    let b = response.as_bytes();
    for i in 0..b.len().saturating_sub(2) {
        if b[i] == b'(' && b[i + 1].is_ascii_uppercase() && b[i + 2] == b')' {
            let k = (b[i + 1] - b'A') as usize;
            return (k < options.len()).then_some(k);
        }
    }
    let t = response.trim();
    if t.len() == 1 && t.as_bytes()[0].is_ascii_uppercase() {
        let k = (t.as_bytes()[0] - b'A') as usize;
        return (k < options.len()).then_some(k);
    }
    let lower = t.to_lowercase();
    options
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o.split_once(") ").map_or(*o, |(_, text)| text).to_lowercase()))
        .filter(|(_, text)| !text.is_empty() && lower.contains(text.as_str()))
        .max_by_key(|(_, text)| text.len())
        .map(|(i, _)| i)
}

/// Misalignment between persona-prompted answers and each culture's human
/// answer distribution.
pub fn value_qa(
    h: &ModelHandle,
    catalog: &TemplateCatalog,
    questions: &[Record],
    human: &HumanDistributions,
    cultures: &[Culture],
    repeats: usize,
    divergence: Divergence,
) -> Result<TaskOutput> {
    let mut items = Vec::new();
    let mut targets = Vec::new();
    let mut flat: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &c in cultures {
        let per = human.get(&c).ok_or_else(|| Error::Config(format!("no human distributions for {c}")))?;
        let prefix = culture_prefix(catalog, &Profile::default().with_culture(c))?;
        for q in questions {
            let key = format!("{c}/{}", q.id);
            let dist = per.get(&q.id).ok_or_else(|| biasforge_core::Error::MissingHumanDistribution(key.clone()))?;
            flat.insert(key.clone(), dist.clone());
            for k in 0..repeats {
                items.push((format!("value-{c}-{}-{k:02}", q.id), format!("{prefix}\n\n{}", q.prompt), Profile::default().with_culture(c)));
                targets.push((key.clone(), c, q));
            }
        }
    }
    let responses = ask(h, items)?;
    let mut answers = Vec::new();
    let mut unparsed = 0u64;
    for (resp, (key, c, q)) in responses.iter().zip(&targets) {
        let opts: Vec<&str> = ValueQuestion::parse(&q.prompt).options.lines().collect();
        match parse_option(&resp.response, &opts) {
            Some(option) => answers.push(ValueAnswer { question_id: key.clone(), option, culture: Some(*c) }),
            None => unparsed += 1,
        }
    }
    let mut report = value_misalignment(&answers, &flat, divergence)?;
    report.unparsed = unparsed;
    if unparsed > 0 {
        report.warnings.push(format!("{unparsed} answers named no option"));
    }
    Ok(TaskOutput { report, responses })
}

/// Group balance of generated biographies.
pub fn generated_group_counts(generated: &[Record]) -> TaskOutput {
    TaskOutput { report: group_counts(generated), responses: Vec::new() }
}

/// Where embedding vectors come from, recorded with every analysis.
pub trait Embedder {
    fn source(&self) -> String;
    fn embed(&self, ids: &[String], texts: &[String], provenance: Provenance) -> Result<EmbeddingSet>;
}

impl Embedder for ModelHandle {
    fn source(&self) -> String {
        format!("endpoint:{}:{}", self.config().base_url, self.config().model)
    }

    fn embed(&self, ids: &[String], texts: &[String], provenance: Provenance) -> Result<EmbeddingSet> {
        self.embed_set(texts, ids.to_vec(), provenance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingOutput {
    pub report: EvalReport,
    pub sets: Vec<EmbeddingSet>,
    pub projection: Option<Projection>,
}

/// Mean-embedding distance, alignment loss and a 3-d projection of the
/// original and augmented records of a training set.
pub fn embedding(embedder: &dyn Embedder, records: &[Record]) -> Result<EmbeddingOutput> {
    let mut report = EvalReport::new("embedding");
    report.meta.insert("embedding_source".into(), embedder.source());
    report.meta.insert("embedded_text".into(), "prompt+completion".into());
    let mut sets = Vec::new();
    for prov in [Provenance::Original, Provenance::Augmented] {
        let part: Vec<&Record> = records.iter().filter(|r| r.provenance == prov).collect();
        if part.is_empty() {
            report.warnings.push(format!("no {prov} records to embed"));
            continue;
        }
        let ids: Vec<String> = part.iter().map(|r| r.id.clone()).collect();
        let texts: Vec<String> = part.iter().map(|r| embedded_text(r)).collect();
        sets.push(embedder.embed(&ids, &texts, prov)?);
    }
    let mut projection = None;
    if let [o, a] = sets.as_slice() {
        let n = (o.len() + a.len()) as u64;
        let dist = embedding_distance(o, a)?;
        let loss = compute_alignment_loss(o, a)?;
        report.totals.push(Row { group: GroupKey::ALL, metric: "embedding_distance".into(), value: dist, n });
        report.totals.push(Row { group: GroupKey::ALL, metric: "alignment_loss".into(), value: loss, n });
        if n >= 3 && o.dim() >= 3 {
            let p = project3(&sets)?;
            for (k, share) in p.explained.iter().enumerate() {
                report.totals.push(Row { group: GroupKey::ALL, metric: format!("explained_variance_{}", k + 1), value: *share, n });
            }
            report.warnings.extend(p.warnings.iter().cloned());
            projection = Some(p);
        }
    }
    Ok(EmbeddingOutput { report, sets, projection })
}
