//! Generation metrics over segmented words and Recall@K in both directions.

use alwig::metrics::{bleu4, cider, recall_at_k, rouge_l, Direction, ReferenceSet, SimilarityMatrix};
use alwig::text::{metric_words, Lexicon};

pub fn run_example() -> alwig::Result<()> {
    let lex = Lexicon::new(["小猫", "沙发", "睡觉", "小狗", "草地", "奔跑"]);
    let words = |s: &str| metric_words(s, &lex);
    let hyps = vec![words("小猫在沙发上睡觉"), words("小狗在草地奔跑")];
    let refs = ReferenceSet::new(vec![
        vec![words("小猫在沙发上睡觉"), words("一只小猫睡觉")],
        vec![words("小狗在草地上奔跑"), words("草地上的小狗")],
    ])?;
    for (i, (h, r)) in hyps.iter().zip(refs.items()).enumerate() {
        println!(
            "item {i}: {h:?} BLEU-4 {:.3} Rouge-L {:.3}",
            bleu4(h, r)?,
            rouge_l(h, r)?
        );
    }
    let c = cider(&hyps, &refs)?;
    println!("CIDEr-D corpus {:.3}, per item {:?}", c.corpus, c.per_item);

    // three texts, two videos; text 2 also belongs to video 0
    let sim = SimilarityMatrix::new(vec![0.9, 0.1, 0.3, 0.8, 0.2, 0.4], 2, vec![0, 1, 0])?;
    for k in [1, 2] {
        println!(
            "R@{k}: text->video {:.1}%, video->text {:.1}%",
            recall_at_k(&sim, k, Direction::TextToVideo)?,
            recall_at_k(&sim, k, Direction::VideoToText)?
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
