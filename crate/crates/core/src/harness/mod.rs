//! File formats, synthetic data and the train / eval / filter / stats
//! pipeline behind the command-line tool.

pub mod commands;
mod config;
mod dataset;
mod eval;
mod features;
mod filter;
mod stats;
mod synth;
mod train;

pub use config::{load_toml, parse_toml, DataConfig, EvalConfig, RunConfig, TrainConfig};
pub use dataset::{load_dataset, parse_records, records_to_jsonl, write_dataset, Dataset, DatasetRecord};
pub use eval::{decode, evaluate_items, protocol_for, DecodeSettings, DecodedItem, EvalOutput, DECODE_BANNED};
pub use features::{decode_features, encode_features, read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use filter::{score_dataset, scored_jsonl, write_filter_outputs, FilterSummary, HISTOGRAM_BINS};
pub use stats::{corpus_stats, stats_report, CorpusStats, Distribution, Overlap, StatsReport};
pub use synth::{synth_generate, write_synth, SynthConfig, SynthData};
pub use train::{
    batch_losses, fit_stage, load_run, losses_tsv, prepare_items, similarity_matrix, t2v_r1, train_run, LoadedRun,
    LossRow, PreparedItem, Stage, StageSpec, TrainedRun, RUN_CHECKPOINT, RUN_CONFIG, RUN_LOSSES, RUN_SCORER, RUN_VOCAB,
};
