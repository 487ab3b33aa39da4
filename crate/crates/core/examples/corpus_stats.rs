//! Length, tag and vocabulary statistics of two corpora and their word
//! overlap.

use alwig::harness::{stats_report, synth_generate, SynthConfig};
use alwig::text::Lexicon;

pub fn run_example() -> alwig::Result<()> {
    let data = synth_generate(&SynthConfig {
        items: 60,
        holdout_items: 20,
        pretrain_items: 60,
        ..SynthConfig::default()
    })?;
    let lex = Lexicon::new(data.lexicon());
    let report = stats_report(&[("train", &data.train), ("pretrain", &data.pretrain)], &lex)?;
    print!("{}", report.to_kv());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
