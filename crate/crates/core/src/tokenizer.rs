//! Byte-pair-encoding subword vocabulary: training, encoding, decoding.
//!
//! Words are whitespace-separated; the word-final symbol carries an
//! end-of-word marker so detokenization is unambiguous. In word-granularity
//! text the underscore is an ordinary in-token character. Five special
//! tokens occupy fixed ids at the front of every vocabulary and are never
//! produced by merges.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::TextGranularity;

/// Marker appended to the word-final symbol of every word.
pub const END_OF_WORD: &str = "</w>";

/// The five reserved tokens, in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialToken {
    /// `<s>`, id 0: sequence start.
    Bos,
    /// `<pad>`, id 1: padding.
    Pad,
    /// `</s>`, id 2: sequence end.
    Eos,
    /// `<unk>`, id 3: out-of-alphabet character.
    Unk,
    /// `<mask>`, id 4: infilling mask.
    Mask,
}

impl SpecialToken {
    pub const ALL: [SpecialToken; 5] = [
        SpecialToken::Bos,
        SpecialToken::Pad,
        SpecialToken::Eos,
        SpecialToken::Unk,
        SpecialToken::Mask,
    ];

    pub const fn id(self) -> u32 {
        match self {
            SpecialToken::Bos => 0,
            SpecialToken::Pad => 1,
            SpecialToken::Eos => 2,
            SpecialToken::Unk => 3,
            SpecialToken::Mask => 4,
        }
    }

    pub const fn text(self) -> &'static str {
        match self {
            SpecialToken::Bos => "<s>",
            SpecialToken::Pad => "<pad>",
            SpecialToken::Eos => "</s>",
            SpecialToken::Unk => "<unk>",
            SpecialToken::Mask => "<mask>",
        }
    }
}

pub const BOS_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const MASK_ID: u32 = 4;
pub const NUM_SPECIALS: usize = 5;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("target size {target} must exceed base symbols plus specials ({minimum})")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("corpus exhausted before reaching target size {target}; achieved {achieved} tokens")]
    CorpusTooSmall { target: usize, achieved: usize },
    #[error("syllable-mode corpus contains an underscored token {token:?}")]
    UnderscoreInSyllableMode { token: String },
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },
    #[error("invalid vocabulary file: {0}")]
    InvalidFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained subword inventory: ordered tokens, ordered merges, fixed specials.
///
/// Token ids are dense `0..len()`; ids 0..=4 are the special tokens.
/// Immutable after training.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_ids: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    merge_ranks: HashMap<(String, String), usize>,
    granularity: TextGranularity,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn granularity(&self) -> TextGranularity {
        self.granularity
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token_to_id(&self, token: &str) -> Option<u32> {
        self.token_ids.get(token).copied()
    }

    pub fn id_to_token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    fn from_parts(
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
        granularity: TextGranularity,
    ) -> Result<Self, TokenizerError> {
        let mut token_ids = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if token_ids.insert(tok.clone(), id as u32).is_some() {
                return Err(TokenizerError::InvalidFile(format!(
                    "duplicate token {tok:?}"
                )));
            }
        }
        for (i, special) in SpecialToken::ALL.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(special.text()) {
                return Err(TokenizerError::InvalidFile(format!(
                    "special token {} missing at id {i}",
                    special.text()
                )));
            }
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            let merged = format!("{}{}", pair.0, pair.1);
            if !token_ids.contains_key(&merged) {
                return Err(TokenizerError::InvalidFile(format!(
                    "merge {rank} produces {merged:?} which is not in the token list"
                )));
            }
            merge_ranks.insert(pair.clone(), rank);
        }
        Ok(Vocabulary {
            tokens,
            token_ids,
            merges,
            merge_ranks,
            granularity,
        })
    }
}

/// Splits one word into its base symbols: one per character, with the
/// end-of-word marker attached to the last.
fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let last = chars.len() - 1;
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == last {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Trains a BPE vocabulary to exactly `target_size` tokens.
///
/// Starts from the per-character alphabet (both plain and word-final
/// variants of every character seen) and repeatedly merges the most
/// frequent adjacent symbol pair; frequency ties are broken by
/// lexicographic order of the pair. A merge whose product would collide
/// with a special token string is skipped.
pub fn train_bpe<I, S>(
    corpus: I,
    target_size: usize,
    granularity: TextGranularity,
) -> Result<Vocabulary, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for line in corpus {
        for word in line.as_ref().split_whitespace() {
            if granularity == TextGranularity::Syllable && word.contains('_') {
                return Err(TokenizerError::UnderscoreInSyllableMode {
                    token: word.to_string(),
                });
            }
            *word_counts.entry(word.to_string()).or_insert(0) += 1;
        }
    }

    // Base alphabet: plain and word-final variant of every character, so any
    // string over the training characters encodes without <unk>.
    let mut base: BTreeSet<String> = BTreeSet::new();
    for word in word_counts.keys() {
        for c in word.chars() {
            base.insert(c.to_string());
            base.insert(format!("{c}{END_OF_WORD}"));
        }
    }
    let minimum = base.len() + NUM_SPECIALS;
    if target_size <= minimum {
        return Err(TokenizerError::TargetTooSmall {
            target: target_size,
            minimum,
        });
    }

    let mut tokens: Vec<String> = SpecialToken::ALL.iter().map(|s| s.text().to_string()).collect();
    tokens.extend(base.iter().cloned());
    let special_texts: HashSet<&'static str> =
        SpecialToken::ALL.iter().map(|s| s.text()).collect();

    // Working state: per unique word, its current symbol sequence and count.
    let words: Vec<(Vec<String>, u64)> = {
        let mut v: Vec<(String, u64)> = word_counts.into_iter().collect();
        v.sort(); // deterministic iteration order
        v.into_iter()
            .map(|(w, c)| (word_symbols(&w), c))
            .collect()
    };
    let mut word_syms: Vec<Vec<String>> = words.iter().map(|(s, _)| s.clone()).collect();
    let counts: Vec<u64> = words.iter().map(|(_, c)| *c).collect();

    let mut pair_counts: HashMap<(String, String), i64> = HashMap::new();
    let mut pair_words: HashMap<(String, String), HashSet<usize>> = HashMap::new();
    for (wi, syms) in word_syms.iter().enumerate() {
        for pair in adjacent_pairs(syms) {
            *pair_counts.entry(pair.clone()).or_insert(0) += counts[wi] as i64;
            pair_words.entry(pair).or_default().insert(wi);
        }
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    while tokens.len() < target_size {
        let best = pair_counts
            .iter()
            .filter(|(p, c)| {
                **c > 0 && !special_texts.contains(format!("{}{}", p.0, p.1).as_str())
            })
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(p, _)| p.clone());
        let Some(pair) = best else {
            return Err(TokenizerError::CorpusTooSmall {
                target: target_size,
                achieved: tokens.len(),
            });
        };

        let merged = format!("{}{}", pair.0, pair.1);
        let affected: Vec<usize> = pair_words
            .get(&pair)
            .map(|s| {
                let mut v: Vec<usize> = s.iter().copied().collect();
                v.sort_unstable();
                v
            })
            .unwrap_or_default();
        for wi in affected {
            let old = std::mem::take(&mut word_syms[wi]);
            let weight = counts[wi] as i64;
            for p in adjacent_pairs(&old) {
                *pair_counts.entry(p.clone()).or_insert(0) -= weight;
                if let Some(set) = pair_words.get_mut(&p) {
                    set.remove(&wi);
                }
            }
            let new = apply_merge(&old, &pair, &merged);
            for p in adjacent_pairs(&new) {
                *pair_counts.entry(p.clone()).or_insert(0) += weight;
                pair_words.entry(p).or_default().insert(wi);
            }
            word_syms[wi] = new;
        }

        tokens.push(merged);
        merges.push(pair);
    }

    Vocabulary::from_parts(tokens, merges, granularity)
}

fn adjacent_pairs(symbols: &[String]) -> Vec<(String, String)> {
    symbols
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

/// Replaces every non-overlapping occurrence of `pair`, left to right.
fn apply_merge(symbols: &[String], pair: &(String, String), merged: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Encodes text to token ids by greedy application of the merges in
/// training order. Characters outside the base alphabet map to `<unk>`.
pub fn encode(text: &str, vocab: &Vocabulary, add_bos_eos: bool) -> Vec<u32> {
    let mut ids = Vec::new();
    if add_bos_eos {
        ids.push(BOS_ID);
    }
    for word in text.split_whitespace() {
        let mut syms = word_symbols(word);
        loop {
            let mut best: Option<(usize, usize)> = None; // (rank, position)
            for i in 0..syms.len().saturating_sub(1) {
                let key = (syms[i].clone(), syms[i + 1].clone());
                if let Some(&rank) = vocab.merge_ranks.get(&key) {
                    if best.map_or(true, |(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let pair = vocab.merges[rank].clone();
            let merged = format!("{}{}", pair.0, pair.1);
            syms = apply_merge(&syms, &pair, &merged);
        }
        for sym in &syms {
            ids.push(vocab.token_to_id(sym).unwrap_or(UNK_ID));
        }
    }
    if add_bos_eos {
        ids.push(EOS_ID);
    }
    ids
}

/// Decodes ids back to text. Special tokens are dropped, except `<mask>`
/// which is rendered visibly as its own word so noised sequences can be
/// inspected. Exact inverse of [`encode`] on single-spaced in-alphabet text.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<String, TokenizerError> {
    let mut buf = String::new();
    for &id in ids {
        if id as usize >= vocab.len() {
            return Err(TokenizerError::IdOutOfRange {
                id,
                size: vocab.len(),
            });
        }
        if id == MASK_ID {
            buf.push_str(SpecialToken::Mask.text());
            buf.push(' ');
            continue;
        }
        if (id as usize) < NUM_SPECIALS {
            continue;
        }
        let tok = vocab.id_to_token(id).expect("id checked in range");
        match tok.strip_suffix(END_OF_WORD) {
            Some(stem) => {
                buf.push_str(stem);
                buf.push(' ');
            }
            None => buf.push_str(tok),
        }
    }
    while buf.ends_with(' ') {
        buf.pop();
    }
    Ok(buf)
}

const FILE_MAGIC: &str = "vietseq-vocab";
const FILE_VERSION: u32 = 1;

impl fmt::Display for TextGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextGranularity::Syllable => write!(f, "syllable"),
            TextGranularity::Word => write!(f, "word"),
        }
    }
}

impl Vocabulary {
    /// Writes the line-oriented vocabulary file: a header with version and
    /// granularity, `token<TAB>id` lines, then a `#merges` section with one
    /// `left right` pair per line in merge order.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), TokenizerError> {
        writeln!(w, "{FILE_MAGIC} {FILE_VERSION} {}", self.granularity)?;
        for (id, tok) in self.tokens.iter().enumerate() {
            writeln!(w, "{tok}\t{id}")?;
        }
        writeln!(w, "#merges")?;
        for (l, r) in &self.merges {
            writeln!(w, "{l} {r}")?;
        }
        Ok(())
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<(), TokenizerError> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load<R: Read>(r: R) -> Result<Self, TokenizerError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| TokenizerError::InvalidFile("empty file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != FILE_MAGIC {
            return Err(TokenizerError::InvalidFile(format!(
                "bad header {header:?}"
            )));
        }
        if fields[1] != FILE_VERSION.to_string() {
            return Err(TokenizerError::InvalidFile(format!(
                "unsupported version {}",
                fields[1]
            )));
        }
        let granularity = match fields[2] {
            "syllable" => TextGranularity::Syllable,
            "word" => TextGranularity::Word,
            other => {
                return Err(TokenizerError::InvalidFile(format!(
                    "unknown granularity {other:?}"
                )))
            }
        };

        let mut tokens = Vec::new();
        let mut merges = Vec::new();
        let mut in_merges = false;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if line == "#merges" {
                in_merges = true;
                continue;
            }
            if in_merges {
                let mut it = line.splitn(2, ' ');
                let (l, r) = (it.next(), it.next());
                match (l, r) {
                    (Some(l), Some(r)) if !l.is_empty() && !r.is_empty() => {
                        merges.push((l.to_string(), r.to_string()))
                    }
                    _ => {
                        return Err(TokenizerError::InvalidFile(format!(
                            "line {}: bad merge {line:?}",
                            lineno + 2
                        )))
                    }
                }
            } else {
                let mut it = line.splitn(2, '\t');
                let tok = it.next().unwrap_or_default();
                let id: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        TokenizerError::InvalidFile(format!(
                            "line {}: bad token line {line:?}",
                            lineno + 2
                        ))
                    })?;
                if id != tokens.len() {
                    return Err(TokenizerError::InvalidFile(format!(
                        "line {}: token id {id} out of order",
                        lineno + 2
                    )));
                }
                tokens.push(tok.to_string());
            }
        }
        Vocabulary::from_parts(tokens, merges, granularity)
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Self, TokenizerError> {
        let file = std::fs::File::open(path)?;
        Self::load(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_vocab(lines: &[&str], size: usize) -> Vocabulary {
        train_bpe(lines.iter().copied(), size, TextGranularity::Syllable).unwrap()
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // "aa" occurs 3 times in "aaab aab" (twice in the first word, once
        // in the second), more than any other pair.
        let base = 1 + 2 + 2; // chars a,b plain + final variants minus... computed below
        let _ = base;
        let vocab = train_bpe(
            ["aaab aab"],
            NUM_SPECIALS + 4 + 1, // a, b, a</w>, b</w>, one merge
            TextGranularity::Syllable,
        )
        .unwrap();
        assert_eq!(vocab.merges().len(), 1);
        assert_eq!(vocab.merges()[0], ("a".to_string(), "a".to_string()));
    }

    #[test]
    fn zero_merges_gives_character_vocabulary() {
        let err = train_bpe(["ab"], NUM_SPECIALS + 4, TextGranularity::Syllable);
        assert!(matches!(err, Err(TokenizerError::TargetTooSmall { .. })));
        // One above the minimum trains exactly one merge.
        let vocab = tiny_vocab(&["ab"], NUM_SPECIALS + 4 + 1);
        assert_eq!(vocab.len(), NUM_SPECIALS + 5);
    }

    #[test]
    fn corpus_too_small_reports_achieved_size() {
        let err = train_bpe(["ab ab"], 1000, TextGranularity::Syllable);
        match err {
            Err(TokenizerError::CorpusTooSmall { target, achieved }) => {
                assert_eq!(target, 1000);
                assert!(achieved < 1000);
            }
            other => panic!("expected CorpusTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_over_training_corpus() {
        let lines = ["nghiên cứu viên", "chúng tôi là những", "nghiên cứu"];
        let vocab = tiny_vocab(&lines, 60);
        for line in lines {
            let ids = encode(line, &vocab, false);
            assert_eq!(decode(&ids, &vocab).unwrap(), line);
        }
    }

    #[test]
    fn empty_text_with_bos_eos() {
        let vocab = tiny_vocab(&["a b"], NUM_SPECIALS + 4 + 1);
        let ids = encode("", &vocab, true);
        assert_eq!(ids, vec![BOS_ID, EOS_ID]);
        assert_eq!(decode(&ids, &vocab).unwrap(), "");
    }

    #[test]
    fn word_mode_whole_word_lookup() {
        let lines = ["Chúng_tôi là những", "Chúng_tôi Chúng_tôi Chúng_tôi"];
        let vocab = train_bpe(lines.iter().copied(), 120, TextGranularity::Word).unwrap();
        let want = format!("Chúng_tôi{END_OF_WORD}");
        assert!(
            vocab.token_to_id(&want).is_some(),
            "expected {want:?} to be merged into a single token"
        );
        let ids = encode("Chúng_tôi", &vocab, false);
        assert_eq!(ids.len(), 1);
        assert_eq!(vocab.id_to_token(ids[0]), Some(want.as_str()));
    }

    #[test]
    fn syllable_mode_rejects_underscores() {
        let err = train_bpe(["Chúng_tôi là"], 100, TextGranularity::Syllable);
        assert!(matches!(
            err,
            Err(TokenizerError::UnderscoreInSyllableMode { .. })
        ));
    }

    #[test]
    fn unknown_characters_map_to_unk() {
        let vocab = tiny_vocab(&["ab ab"], NUM_SPECIALS + 4 + 1);
        let ids = encode("axb", &vocab, false);
        assert!(ids.contains(&UNK_ID));
    }

    #[test]
    fn mask_renders_visibly() {
        let vocab = tiny_vocab(&["ab ab"], NUM_SPECIALS + 4 + 1);
        let mut ids = encode("ab", &vocab, false);
        ids.insert(0, MASK_ID);
        let text = decode(&ids, &vocab).unwrap();
        assert!(text.starts_with("<mask> "));
    }

    #[test]
    fn decode_rejects_out_of_range_id() {
        let vocab = tiny_vocab(&["ab"], NUM_SPECIALS + 4 + 1);
        let bad = vocab.len() as u32;
        assert!(matches!(
            decode(&[bad], &vocab),
            Err(TokenizerError::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let lines = ["con mèo ngồi", "con mèo nằm", "con chó chạy"];
        let a = tiny_vocab(&lines, 70);
        let b = tiny_vocab(&lines, 70);
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.merges, b.merges);
    }

    #[test]
    fn save_load_round_trip_preserves_ids() {
        let vocab = tiny_vocab(&["con mèo ngồi trên thảm"], 60);
        let mut buf = Vec::new();
        vocab.save(&mut buf).unwrap();
        let loaded = Vocabulary::load(buf.as_slice()).unwrap();
        assert_eq!(vocab.tokens, loaded.tokens);
        assert_eq!(vocab.merges, loaded.merges);
        assert_eq!(loaded.granularity(), TextGranularity::Syllable);
        for special in SpecialToken::ALL {
            assert_eq!(
                loaded.token_to_id(special.text()),
                Some(special.id()),
                "special id for {} must be stable",
                special.text()
            );
        }
    }

    proptest! {
        // decode ∘ encode is the identity on single-spaced strings over the
        // training alphabet.
        #[test]
        fn prop_round_trip(words in proptest::collection::vec("[abcdeàáâđ]{1,6}", 1..8)) {
            let corpus = ["àa áb âc đd ee abcde àáâđ"];
            let vocab = train_bpe(corpus.iter().copied(), 80, TextGranularity::Syllable).unwrap();
            let text = words.join(" ");
            let ids = encode(&text, &vocab, true);
            prop_assert!(ids.len() <= text.chars().count() + 2);
            prop_assert_eq!(decode(&ids, &vocab).unwrap(), text);
        }
    }
}
