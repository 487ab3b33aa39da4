//! Greedy and beam decoding over a hand-written step scorer, then over an
//! untrained decoder conditioned on a video.

use alwig::model::{beam_search, greedy_decode, Alwig, BeamConfig, ModelConfig, StepScorer, Task, VideoClipFeatures};
use alwig::tensor::Tensor;
use alwig::text::{BOS, CLS, EOS, PAD};

/// Token 0 looks best first but leads nowhere good; token 3 pays off.
struct Trap;

impl StepScorer for Trap {
    fn vocab_size(&self) -> usize {
        4
    }

    fn log_probs(&self, prefix: &[u32]) -> alwig::Result<Vec<f64>> {
        Ok(match prefix {
            [] => vec![-0.2, -10.0, -10.0, -0.7],
            [0] => vec![-10.0, -10.0, -2.8, -10.0],
            _ => vec![-10.0, -10.0, -0.8, -10.0],
        })
    }
}

pub fn run_example() -> alwig::Result<()> {
    let cfg = BeamConfig::new(2, 2);
    let g = greedy_decode(&Trap, &cfg)?;
    let b = beam_search(&Trap, &cfg)?;
    println!("greedy {:?} score {:.3}", g.tokens, g.score());
    println!("beam 2 {:?} score {:.3}", b.tokens, b.score());
    assert_eq!(b.tokens, vec![3, EOS]);

    let mc = ModelConfig {
        d_v: 4,
        d_h: 16,
        d_s: 8,
        d_ff: 32,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        vocab_size: 12,
        max_text_len: 8,
        ..ModelConfig::default()
    };
    let model = Alwig::init(mc, 0)?;
    let frames: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let video = VideoClipFeatures::new(Tensor::new(vec![3, 4], frames)?)?;
    let fusion = model.fusion(&video, &[7, 9])?;
    for task in [Task::Title, Task::Caption] {
        let scorer = model.scorer(fusion.clone(), task);
        let cfg = BeamConfig::new(3, 6).banning(&[PAD, BOS, CLS]);
        let h = beam_search(&scorer, &cfg)?;
        println!(
            "{task:?}: tokens {:?} length-normalised log-prob {:.3}",
            h.tokens,
            h.score()
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
