//! Two-stream scorer filtering: matched video-title pairs survive the 0.3
//! threshold, pairs with a swapped title mostly do not.

use alwig::harness::{synth_generate, SynthConfig};
use alwig::model::{ModelConfig, VideoClipFeatures};
use alwig::protocol::MATCH_THRESHOLD;
use alwig::scorer::{filter_dataset, train_two_stream, MatchPair, ScorerTraining};
use alwig::text::Vocabulary;

pub fn run_example() -> alwig::Result<()> {
    let data = synth_generate(&SynthConfig {
        items: 96,
        holdout_items: 0,
        pretrain_items: 0,
        noise: 0.1,
        ..SynthConfig::default()
    })?;
    let vocab = Vocabulary::build(data.train.iter().map(|r| r.title.as_str()), std::iter::empty());
    let pair = |i: usize, title_of: usize| -> alwig::Result<MatchPair> {
        let rec = &data.train[i];
        let title = data.train[title_of].title.clone();
        Ok(MatchPair {
            video_id: rec.video_id.clone(),
            tokens: vocab.tokenize(&title),
            title,
            frames: VideoClipFeatures::new(data.features[&*rec.feature_file.to_string_lossy()].clone())?,
        })
    };
    let n = data.train.len();
    let matched = (0..n).map(|i| pair(i, i)).collect::<alwig::Result<Vec<_>>>()?;
    let swapped = (0..n)
        .map(|i| pair(i, (i + n / 2) % n))
        .collect::<alwig::Result<Vec<_>>>()?;

    let config = ModelConfig {
        d_v: 16,
        d_h: 32,
        d_s: 16,
        d_ff: 64,
        encoder_layers: 1,
        heads: 4,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let opts = ScorerTraining {
        epochs: 15,
        batch_size: 32,
        ..ScorerTraining::default()
    };
    let trained = train_two_stream(&matched, &config, &opts)?;
    println!(
        "scorer loss {:.3} -> {:.3}",
        trained.epoch_losses[0],
        trained.epoch_losses[trained.epoch_losses.len() - 1]
    );
    for (name, pairs) in [("matched", &matched), ("swapped", &swapped)] {
        let out = filter_dataset(pairs, &trained.model, MATCH_THRESHOLD)?;
        println!(
            "{name}: kept {} of {} at threshold {MATCH_THRESHOLD}; score histogram {:?}",
            out.kept().len(),
            out.scored.len(),
            out.histogram(10)
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
