//! End to end on a small synthetic corpus: generate, pre-train on titles,
//! fine-tune on titles and captions, then evaluate retrieval and generation
//! on held-out videos.

use alwig::harness::{
    evaluate_items, load_dataset, prepare_items, protocol_for, synth_generate, train_run, write_synth, DecodeSettings,
    RunConfig, SynthConfig,
};
use alwig::model::ModelConfig;
use alwig::tensor::LrSchedule;
use alwig::text::Lexicon;

pub fn run_example() -> alwig::Result<()> {
    let dir = tempfile::tempdir().map_err(|source| alwig::Error::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let data = synth_generate(&SynthConfig {
        items: 80,
        holdout_items: 20,
        pretrain_items: 120,
        ..SynthConfig::default()
    })?;
    write_synth(&data, dir.path())?;

    let mut cfg = RunConfig::default();
    cfg.data.train = Some(dir.path().join("train.jsonl"));
    cfg.data.pretrain = Some(dir.path().join("pretrain.jsonl"));
    cfg.model = ModelConfig {
        d_v: 16,
        d_h: 32,
        d_s: 16,
        d_ff: 64,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 4,
        max_text_len: 16,
        ..ModelConfig::default()
    };
    cfg.train.batch_size = 16;
    cfg.train.pretrain_epochs = 4;
    cfg.train.finetune_epochs = 8;
    cfg.schedule = LrSchedule {
        warmup_epochs: 1,
        peak_lr: 5e-3,
        final_lr: 5e-4,
        total_epochs: 10,
    };
    cfg.scorer.epochs = 0;
    let run = train_run(&cfg)?;
    for row in run.log.iter().filter(|r| r.epoch % 4 == 0) {
        println!(
            "{} epoch {:2}: align {:.3} gen {:.3} lr {:.1e}",
            row.stage, row.epoch, row.align, row.gen, row.lr
        );
    }

    let holdout = load_dataset(&dir.path().join("holdout.jsonl"))?;
    let items = prepare_items(&holdout, &run.vocab, run.model.config())?;
    let lex = Lexicon::new(data.lexicon());
    let settings = DecodeSettings { beam: 3, max_len: 12 };
    let protocol = protocol_for(3, cfg.eval.threshold, cfg.train.weight_decay, cfg.schedule);
    let out = evaluate_items(&run.model, &run.vocab, &items, &lex, settings, protocol)?;
    print!("{}", out.report.to_kv());
    let first = &out.decoded[0];
    println!(
        "{}: decoded {:?}, reference {:?}",
        first.video_id, first.title, holdout.records[0].title
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
