//! Character-level tokenization for the model and lexicon-driven word
//! segmentation for the metrics.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::hash::Hash;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const CLS: u32 = 3;
pub const SEP: u32 = 4;
pub const UNK: u32 = 5;

const RESERVED: [&str; 6] = ["[PAD]", "[BOS]", "[EOS]", "[CLS]", "[SEP]", "[UNK]"];

/// Token ids for one text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `[BOS] ids [EOS]`, the decoder target layout.
    pub fn framed(&self) -> TokenSequence {
        let mut v = Vec::with_capacity(self.0.len() + 2);
        v.push(BOS);
        v.extend_from_slice(&self.0);
        v.push(EOS);
        TokenSequence(v)
    }

    /// Drops a leading BOS and everything from the first EOS on.
    pub fn unframed(&self) -> TokenSequence {
        let ids = self.0.strip_prefix(&[BOS]).unwrap_or(&self.0);
        let end = ids.iter().position(|&t| t == EOS).unwrap_or(ids.len());
        TokenSequence(ids[..end].to_vec())
    }
}

/// Bidirectional token/id map with the reserved tokens at ids 0..=5.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Reserved tokens, then every distinct printable character of `texts`
    /// in code-point order, then whole-tag tokens not already present.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, tags: impl IntoIterator<Item = &'a str>) -> Self {
        let chars: BTreeSet<char> = texts
            .into_iter()
            .flat_map(str::chars)
            .filter(|c| !c.is_control())
            .collect();
        let tags: BTreeSet<&str> = tags
            .into_iter()
            .filter(|t| !t.is_empty() && !t.chars().any(char::is_control))
            .collect();
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(chars.into_iter().map(String::from));
        tokens.extend(tags.into_iter().map(String::from));
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(Error::Input(format!(
                    "vocabulary line {} must be the reserved token {r}",
                    i + 1
                )));
            }
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains('\n') {
                return Err(Error::Input(format!("invalid vocabulary token on line {}", i + 1)));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    /// One token per line; line number (from zero) is the id.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens = text.lines().map(String::from).collect();
        Self::from_tokens(tokens).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Tag lookup; unknown tags map to UNK.
    pub fn tag_id(&self, tag: &str) -> u32 {
        self.id(tag).unwrap_or(UNK)
    }

    /// One id per Unicode scalar; unknown characters become UNK. No
    /// BOS/EOS framing is added.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let mut buf = [0u8; 4];
        TokenSequence(
            text.chars()
                .map(|c| self.id(c.encode_utf8(&mut buf)).unwrap_or(UNK))
                .collect(),
        )
    }

    /// Concatenates token strings, skipping PAD/BOS/EOS/CLS/SEP.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| !matches!(id, PAD | BOS | EOS | CLS | SEP))
            .filter_map(|&id| self.token(id))
            .collect()
    }
}

/// Multi-character words for greedy longest-match segmentation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    words: HashSet<String>,
    max_len: usize,
}

impl Lexicon {
    /// Entries shorter than two characters are dropped; the single-character
    /// fallback already covers them.
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_string())
            .filter(|w| w.chars().count() >= 2)
            .collect();
        let max_len = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        Lexicon { words, max_len }
    }

    /// UTF-8 file, one word per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn max_word_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Greedy forward longest-match segmentation. Characters that do not start
/// a lexicon word become one-character words; the output concatenates back
/// to `text`.
pub fn segment(text: &str, lex: &Lexicon) -> Vec<String> {
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut words = Vec::new();
    let mut i = 0;
    while i < n {
        let longest = lex.max_len.min(n - i);
        let step = (2..=longest)
            .rev()
            .find(|&l| lex.contains(&text[bounds[i]..bounds[i + l]]))
            .unwrap_or(1);
        words.push(text[bounds[i]..bounds[i + step]].to_string());
        i += step;
    }
    words
}

/// Segments and drops whitespace-only words; the form the metrics consume.
pub fn metric_words(text: &str, lex: &Lexicon) -> Vec<String> {
    segment(text, lex)
        .into_iter()
        .filter(|w| !w.trim().is_empty())
        .collect()
}

/// All contiguous `n`-word windows with multiplicity.
pub fn ngrams<T: Hash + Eq>(words: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || words.len() < n {
        return counts;
    }
    for w in words.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(["今天天气好", "视频"], ["美食"])
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let v = vocab();
        assert_eq!(v.id("[PAD]"), Some(PAD));
        assert_eq!(v.id("[UNK]"), Some(UNK));
        assert_eq!(v.token(BOS), Some("[BOS]"));
        assert!(v.id("美食").is_some());
    }

    #[test]
    fn tokenize_cases() {
        let v = vocab();
        assert!(v.tokenize("").is_empty());
        let ids = v.tokenize("今天气好视");
        assert_eq!(ids.len(), 5);
        assert!(!ids.ids().contains(&UNK));
        assert_eq!(v.detokenize(ids.ids()), "今天气好视");

        let ids = v.tokenize("今天X好");
        let unk: Vec<usize> = ids
            .ids()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == UNK)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(unk, vec![2]);
    }

    #[test]
    fn vocab_file_round_trip_and_validation() {
        let v = vocab();
        let tokens: Vec<String> = v.to_file_string().lines().map(String::from).collect();
        assert_eq!(Vocabulary::from_tokens(tokens.clone()).unwrap(), v);
        let mut swapped = tokens.clone();
        swapped.swap(0, 1);
        assert!(Vocabulary::from_tokens(swapped).is_err());
        let mut dup = tokens;
        dup.push("今".into());
        assert!(Vocabulary::from_tokens(dup).is_err());
    }

    #[test]
    fn segment_cases() {
        let lex = Lexicon::new(["AB", "ABC"]);
        assert!(segment("", &lex).is_empty());
        assert_eq!(segment("ABCD", &lex), vec!["ABC", "D"]);
        assert_eq!(segment("xyz", &lex), vec!["x", "y", "z"]);
        let zh = Lexicon::new(["天气", "今天", "天气好"]);
        assert_eq!(segment("今天天气好吗", &zh), vec!["今天", "天气好", "吗"]);
        assert_eq!(zh.max_word_len(), 3);
    }

    #[test]
    fn ngram_cases() {
        let w = ["a", "b", "c"];
        let bi = ngrams(&w, 2);
        assert_eq!(bi.len(), 2);
        assert_eq!(bi[&["a", "b"][..]], 1);
        assert_eq!(bi[&["b", "c"][..]], 1);
        let uni = ngrams(&["a", "a", "a"], 1);
        assert_eq!(uni[&["a"][..]], 3);
        assert!(ngrams(&w, 4).is_empty());
    }

    proptest! {
        #[test]
        fn segment_is_lossless(text in "[ab天气 x]{0,20}", words in prop::collection::vec("[ab天气x]{1,4}", 0..6)) {
            let lex = Lexicon::new(words);
            let joined: String = segment(&text, &lex).concat();
            prop_assert_eq!(joined, text);
        }

        #[test]
        fn ngram_mass(words in prop::collection::vec(0u8..5, 0..15), n in 1usize..6) {
            let total: usize = ngrams(&words, n).values().sum();
            prop_assert_eq!(total, (words.len() + 1).saturating_sub(n));
        }

        #[test]
        fn tokenize_detokenize_identity(text in "[今天气好视频]{0,12}") {
            let v = vocab();
            prop_assert_eq!(v.detokenize(v.tokenize(&text).ids()), text);
        }
    }
}
