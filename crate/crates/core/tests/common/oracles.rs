//! Brute-force metric oracles. They share no code with the library: n-grams
//! are compared by linear scans, LCS by subsequence enumeration and ranks by
//! a full sort.

type Words = Vec<String>;

fn grams(w: &[String], n: usize) -> Vec<&[String]> {
    if w.len() < n {
        return Vec::new();
    }
    (0..=w.len() - n).map(|i| &w[i..i + n]).collect()
}

fn count(list: &[&[String]], g: &[String]) -> usize {
    list.iter().filter(|x| **x == g).count()
}

fn distinct<'a>(list: &[&'a [String]]) -> Vec<&'a [String]> {
    let mut out: Vec<&[String]> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g);
        }
    }
    out
}

pub fn bleu4(hyp: &[String], refs: &[Words]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let h = grams(hyp, n);
        if h.is_empty() {
            return 0.0;
        }
        let mut matched = 0;
        for g in distinct(&h) {
            let best = refs.iter().map(|r| count(&grams(r, n), g)).max().unwrap();
            matched += count(&h, g).min(best);
        }
        product *= matched as f64 / h.len() as f64;
    }
    if product == 0.0 {
        return 0.0;
    }
    let c = hyp.len() as i64;
    let mut r = refs[0].len() as i64;
    for x in refs {
        let l = x.len() as i64;
        if (l - c).abs() < (r - c).abs() || ((l - c).abs() == (r - c).abs() && l < r) {
            r = l;
        }
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * product.powf(0.25)
}

/// Longest common subsequence by trying every subsequence of the shorter
/// input, longest first.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let n = short.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sub: Vec<&String> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &short[i]).collect();
        let mut it = long.iter();
        if sub.iter().all(|w| it.any(|x| x == *w)) {
            best = size;
        }
    }
    best
}

pub fn rouge_l(hyp: &[String], refs: &[Words]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut best: f64 = 0.0;
    for r in refs {
        let l = lcs(hyp, r);
        if l == 0 {
            continue;
        }
        let p = l as f64 / hyp.len() as f64;
        let rec = l as f64 / r.len() as f64;
        best = best.max((1.0 + beta2) * p * rec / (rec + beta2 * p));
    }
    best
}

/// CIDEr-D per item, straight from the definition.
pub fn cider(hyps: &[Words], refs: &[Vec<Words>]) -> Vec<f64> {
    let items = refs.len() as f64;
    let df = |g: &[String]| -> f64 {
        let n = g.len();
        refs.iter()
            .filter(|item| item.iter().any(|r| grams(r, n).contains(&g)))
            .count()
            .max(1) as f64
    };
    let weights = |w: &[String], n: usize| -> Vec<(Words, f64)> {
        let list = grams(w, n);
        distinct(&list)
            .into_iter()
            .map(|g| (g.to_vec(), count(&list, g) as f64 * (items.ln() - df(g).ln())))
            .collect()
    };
    let norm = |v: &[(Words, f64)]| v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    hyps.iter()
        .zip(refs)
        .map(|(h, item)| {
            let mut sum = 0.0;
            for r in item {
                let delta = h.len() as f64 - r.len() as f64;
                let penalty = (-delta * delta / 72.0).exp();
                let mut orders = 0.0;
                for n in 1..=4 {
                    let hv = weights(h, n);
                    let rv = weights(r, n);
                    let (hn, rn) = (norm(&hv), norm(&rv));
                    if hn == 0.0 || rn == 0.0 {
                        continue;
                    }
                    let mut dot = 0.0;
                    for (g, a) in &hv {
                        for (q, b) in &rv {
                            if g == q {
                                dot += a.min(*b) * b;
                            }
                        }
                    }
                    orders += dot / (hn * rn) * penalty;
                }
                sum += orders / 4.0;
            }
            10.0 * sum / item.len() as f64
        })
        .collect()
}

/// Recall@K by sorting every candidate list; ties go to the lower index.
pub fn recall(scores: &[f64], videos: usize, gt: &[usize], k: usize, text_to_video: bool) -> f64 {
    let texts = gt.len();
    let order = |key: &dyn Fn(usize) -> f64, n: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap().then(a.cmp(&b)));
        idx
    };
    if text_to_video {
        let k = k.min(videos);
        let hits = (0..texts)
            .filter(|&t| {
                let ranked = order(&|v| scores[t * videos + v], videos);
                ranked[..k].contains(&gt[t])
            })
            .count();
        100.0 * hits as f64 / texts as f64
    } else {
        let k = k.min(texts);
        let mut queries = 0;
        let mut hits = 0;
        for v in 0..videos {
            if !gt.contains(&v) {
                continue;
            }
            queries += 1;
            let ranked = order(&|t| scores[t * videos + v], texts);
            if ranked[..k].iter().any(|&t| gt[t] == v) {
                hits += 1;
            }
        }
        100.0 * hits as f64 / queries as f64
    }
}

/// A random corpus over a 20-word alphabet: `(hyps, refs)` with 2 to 5
/// items, hypotheses of length 0 to 12 and 1 to 4 references per item.
/// References are usually noisy copies of the hypothesis so that higher
/// order n-grams match often.
pub fn random_corpus(seed: u64) -> (Vec<Words>, Vec<Vec<Words>>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut rand_chacha::ChaCha8Rng| format!("w{}", rng.random_range(0..20));
    let items = rng.random_range(2..=5);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..items {
        let len = rng.random_range(0..=12);
        let hyp: Words = (0..len).map(|_| word(&mut rng)).collect();
        let n_refs = rng.random_range(1..=4);
        let item: Vec<Words> = (0..n_refs)
            .map(|_| {
                if hyp.is_empty() || rng.random_bool(0.25) {
                    let len = rng.random_range(1..=12);
                    return (0..len).map(|_| word(&mut rng)).collect();
                }
                let mut r: Words = Vec::new();
                for w in &hyp {
                    match rng.random_range(0..10) {
                        0 => {}
                        1 => r.push(word(&mut rng)),
                        2 => {
                            r.push(w.clone());
                            r.push(word(&mut rng));
                        }
                        _ => r.push(w.clone()),
                    }
                }
                if r.is_empty() {
                    r.push(word(&mut rng));
                }
                r.truncate(12);
                r
            })
            .collect();
        hyps.push(hyp);
        refs.push(item);
    }
    (hyps, refs)
}
