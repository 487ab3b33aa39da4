//! Lexicon segmentation for metrics and character tokenization for the
//! model.

use alwig::text::{metric_words, segment, Lexicon, Vocabulary};

pub fn run_example() -> alwig::Result<()> {
    let lex = Lexicon::new(["今天", "天气", "天气预报", "视频"]);
    let text = "今天天气预报 视频很好";
    let words = segment(text, &lex);
    println!("segment:      {words:?}");
    println!("metric words: {:?}", metric_words(text, &lex));
    assert_eq!(words.concat(), text);

    let vocab = Vocabulary::build([text], ["美食"]);
    let ids = vocab.tokenize("今天的视频");
    println!("{} tokens in the vocabulary; ids {:?}", vocab.len(), ids.ids());
    println!("framed {:?} -> {:?}", ids.framed().ids(), vocab.detokenize(ids.ids()));
    println!("tag id of 美食 = {}", vocab.tag_id("美食"));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
