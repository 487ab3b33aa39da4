//! One function per command-line subcommand. Each reads its inputs,
//! writes its outputs under `out` and returns what it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{load_toml, RunConfig};
use super::dataset::load_dataset;
use super::eval::{decode, evaluate_items, protocol_for, DecodeSettings, EvalOutput};
use super::features::read_features;
use super::filter::{score_dataset, write_filter_outputs, FilterSummary};
use super::stats::{stats_report, StatsReport};
use super::synth::{synth_generate, write_synth, SynthConfig, SynthData};
use super::train::{load_run, prepare_items, train_run, LoadedRun, PreparedItem, TrainedRun};
use crate::error::{Error, Result};
use crate::model::{Hypothesis, Task, Variant};
use crate::scorer::check_threshold;
use crate::text::{Lexicon, TokenSequence};

/// Command-line values that take precedence over config files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub beam: Option<usize>,
    pub threshold: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(v) = self.variant {
            cfg.train.variant = v;
        }
        if let Some(b) = self.beam {
            cfg.eval.beam = b;
        }
        if let Some(t) = self.threshold {
            cfg.eval.threshold = t;
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

pub fn cmd_synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<SynthData> {
    let mut cfg: SynthConfig = match config {
        Some(p) => load_toml(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data = synth_generate(&cfg)?;
    write_synth(&data, out)?;
    write(out, "synth.toml", &toml::to_string(&cfg).expect("config serializes"))?;
    Ok(data)
}

pub fn cmd_train(config: &Path, ov: &Overrides, out: &Path) -> Result<TrainedRun> {
    let mut cfg = RunConfig::load(config)?;
    ov.apply(&mut cfg);
    cfg.validate()?;
    let run = train_run(&cfg)?;
    run.save(out)?;
    Ok(run)
}

fn run_lexicon(run: &LoadedRun, lexicon: Option<&Path>) -> Result<Lexicon> {
    match lexicon.or(run.config.data.lexicon.as_deref()) {
        Some(p) => Lexicon::load(p),
        None => Ok(Lexicon::default()),
    }
}

fn run_items(run: &LoadedRun, data: &Path) -> Result<Vec<PreparedItem>> {
    let ds = load_dataset(data)?;
    if ds.is_empty() {
        return Err(Error::Input(format!("{} has no records", data.display())));
    }
    prepare_items(&ds, &run.vocab, run.model.config())
}

/// Writes `report.txt`, `report.json` and `decoded.jsonl`.
pub fn cmd_eval(run_dir: &Path, data: &Path, ov: &Overrides, lexicon: Option<&Path>, out: &Path) -> Result<EvalOutput> {
    let mut run = load_run(run_dir)?;
    ov.apply(&mut run.config);
    run.config.validate()?;
    let items = run_items(&run, data)?;
    let lex = run_lexicon(&run, lexicon)?;
    let c = &run.config;
    let settings = DecodeSettings {
        beam: c.eval.beam,
        max_len: c.eval.max_decode_len,
    };
    let protocol = protocol_for(c.eval.beam, c.eval.threshold, c.train.weight_decay, c.schedule);
    let result = evaluate_items(&run.model, &run.vocab, &items, &lex, settings, protocol)?;
    write(out, "report.txt", &result.report.to_kv())?;
    write(out, "report.json", &result.report.to_json())?;
    let mut lines = String::new();
    for d in &result.decoded {
        let _ = writeln!(lines, "{}", serde_json::to_string(d).expect("decoded item serializes"));
    }
    write(out, "decoded.jsonl", &lines)?;
    Ok(result)
}

pub fn cmd_filter(run_dir: &Path, data: &Path, ov: &Overrides, out: &Path) -> Result<FilterSummary> {
    let mut run = load_run(run_dir)?;
    ov.apply(&mut run.config);
    let threshold = run.config.eval.threshold;
    check_threshold(threshold)?;
    let scorer = run.scorer.as_ref().ok_or_else(|| Error::Format {
        path: run_dir.to_path_buf(),
        reason: "run has no scorer checkpoint (scorer.epochs was 0)".into(),
    })?;
    let ds = load_dataset(data)?;
    let outcome = score_dataset(&ds, &run.vocab, scorer, threshold)?;
    let c = &run.config;
    let protocol = protocol_for(c.eval.beam, threshold, c.train.weight_decay, c.schedule);
    write_filter_outputs(&outcome, &ds, protocol, out)
}

/// Writes `stats.txt` and `stats.json`.
pub fn cmd_stats(data: &[PathBuf], lexicon: Option<&Path>, out: &Path) -> Result<StatsReport> {
    let sets = data.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = data
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("corpus{i}"))
        })
        .map(|n| n.replace(char::is_whitespace, "_"))
        .collect();
    let mut names = names;
    if names.len() == 2 && names[0] == names[1] {
        names[0].push_str("_a");
        names[1].push_str("_b");
    }
    let lex = match lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let corpora: Vec<(&str, &[_])> = names
        .iter()
        .map(String::as_str)
        .zip(sets.iter().map(|d| &d.records[..]))
        .collect();
    let report = stats_report(&corpora, &lex)?;
    write(out, "stats.txt", &report.to_kv())?;
    write(out, "stats.json", &report.to_json())?;
    Ok(report)
}

/// Generates one title (or caption) for a feature file and tag list.
pub fn cmd_decode(
    run_dir: &Path,
    features: &Path,
    tags: &[String],
    task: Task,
    ov: &Overrides,
) -> Result<(String, Hypothesis)> {
    let mut run = load_run(run_dir)?;
    ov.apply(&mut run.config);
    run.config.validate()?;
    let c = run.model.config();
    let frames = read_features(features)?;
    if frames.dim() != c.d_v {
        return Err(Error::Format {
            path: features.to_path_buf(),
            reason: format!("feature dim {} but the model expects {}", frames.dim(), c.d_v),
        });
    }
    let item = PreparedItem {
        video_id: String::new(),
        frames: frames.subsample(c.max_frames),
        tag_ids: tags.iter().take(c.max_tags).map(|t| run.vocab.tag_id(t)).collect(),
        title: TokenSequence::default(),
        captions: Vec::new(),
    };
    let settings = DecodeSettings {
        beam: run.config.eval.beam,
        max_len: run.config.eval.max_decode_len,
    };
    let h = decode(&run.model, &item, task, settings)?;
    Ok((run.vocab.detokenize(h.content()), h))
}
