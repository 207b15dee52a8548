//! Dataset ingestion and the syllable/word text conventions.
//!
//! Covers JSONL loading, the three-step split deduplication, canonical
//! duplicate keys, rule-based sentence splitting, word-mode
//! detokenization, and synthesis of capitalization/punctuation
//! restoration pairs from clean text.
//!
//! All operations are pure functions of their inputs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// One article paired with its gold abstract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizationExample {
    pub guid: String,
    pub article: String,
    #[serde(rename = "abstract")]
    pub summary: String,
}

/// Lowercase unpunctuated input paired with its true-case punctuated target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestorationRecord {
    pub input: String,
    pub target: String,
}

/// Whether whitespace-separated tokens are syllables or segmented words.
///
/// In `Word` mode multi-syllable words are joined by underscores; in
/// `Syllable` mode no token contains an underscore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextGranularity {
    Syllable,
    Word,
}

/// Punctuation class taxonomy for restoration.
///
/// `Comma` covers commas, colons, and standalone dashes; `Period` covers
/// full stops, exclamation marks, and semicolons; `Question` is the
/// question mark alone. Everything else that is stripped carries `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PunctClass {
    Comma,
    Period,
    Question,
    None,
}

/// A stripped punctuation character and where it sat.
///
/// `gap` counts input tokens emitted before the character: gap `g` means
/// the character followed token `g - 1` (gap 0 sits before the first
/// token).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PunctSlot {
    pub gap: usize,
    pub class: PunctClass,
    pub ch: char,
}

/// Restoration training pair with derived slot and capitalization labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorationPair {
    /// Lowercase, punctuation-stripped text.
    pub input: String,
    /// Whitespace-normalized original text.
    pub target: String,
    pub slots: Vec<PunctSlot>,
    /// One flag per input token: true when the original carried an
    /// uppercase letter.
    pub caps: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSchema {
    Summarization,
    Restoration,
    PlainLines,
}

#[derive(Debug, Clone)]
pub enum LoadedDataset {
    Summarization(Vec<SummarizationExample>),
    Restoration(Vec<RestorationRecord>),
    PlainLines(Vec<String>),
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file).lines())
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<Vec<(usize, T)>, CorpusError> {
    let mut records = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

fn reject_empty(path: &Path, line: usize, field: &str, value: &str) -> Result<(), CorpusError> {
    if value.trim().is_empty() {
        return Err(CorpusError::MalformedLine {
            path: path.to_path_buf(),
            line,
            message: format!("field `{field}` is empty"),
        });
    }
    Ok(())
}

/// Loads a UTF-8 JSONL summarization file with `guid`/`article`/`abstract`
/// keys. Malformed lines are rejected with their line number, never
/// skipped.
pub fn load_summarization<P: AsRef<Path>>(
    path: P,
) -> Result<Vec<SummarizationExample>, CorpusError> {
    let path = path.as_ref();
    let records: Vec<(usize, SummarizationExample)> = parse_jsonl(path)?;
    for (line, r) in &records {
        reject_empty(path, *line, "article", &r.article)?;
        reject_empty(path, *line, "abstract", &r.summary)?;
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Loads a UTF-8 JSONL restoration file with `input`/`target` keys.
pub fn load_restoration<P: AsRef<Path>>(path: P) -> Result<Vec<RestorationRecord>, CorpusError> {
    let path = path.as_ref();
    let records: Vec<(usize, RestorationRecord)> = parse_jsonl(path)?;
    for (line, r) in &records {
        reject_empty(path, *line, "target", &r.target)?;
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Loads a plain-text corpus, one document per line. Blank lines are
/// dropped.
pub fn load_plain_lines<P: AsRef<Path>>(path: P) -> Result<Vec<String>, CorpusError> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    for line in open_lines(path)? {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if !line.trim().is_empty() {
            docs.push(line);
        }
    }
    Ok(docs)
}

pub fn load_dataset<P: AsRef<Path>>(
    path: P,
    schema: DatasetSchema,
) -> Result<LoadedDataset, CorpusError> {
    match schema {
        DatasetSchema::Summarization => load_summarization(path).map(LoadedDataset::Summarization),
        DatasetSchema::Restoration => load_restoration(path).map(LoadedDataset::Restoration),
        DatasetSchema::PlainLines => load_plain_lines(path).map(LoadedDataset::PlainLines),
    }
}

/// Canonical duplicate key: the article text, Unicode-NFC-normalized with
/// whitespace runs collapsed to single spaces. Two examples are duplicates
/// iff their keys are equal.
pub fn detect_duplicate_key(example: &SummarizationExample) -> String {
    let nfc: String = example.article.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes duplicate articles across dataset splits in three ordered steps:
/// first within-split duplicates (first occurrence wins), then training
/// articles that appear in validation or test, then validation articles
/// that appear in test. Relative order of survivors is preserved; the
/// validation and test sets lose nothing in the cross-split steps.
pub fn deduplicate_splits(
    train: Vec<SummarizationExample>,
    valid: Vec<SummarizationExample>,
    test: Vec<SummarizationExample>,
) -> (
    Vec<SummarizationExample>,
    Vec<SummarizationExample>,
    Vec<SummarizationExample>,
) {
    fn dedup_within(split: Vec<SummarizationExample>) -> Vec<SummarizationExample> {
        let mut seen = HashSet::new();
        split
            .into_iter()
            .filter(|ex| seen.insert(detect_duplicate_key(ex)))
            .collect()
    }
    fn key_set(split: &[SummarizationExample]) -> HashSet<String> {
        split.iter().map(detect_duplicate_key).collect()
    }

    let train = dedup_within(train);
    let valid = dedup_within(valid);
    let test = dedup_within(test);

    let held_out: HashSet<String> = key_set(&valid).union(&key_set(&test)).cloned().collect();
    let train: Vec<_> = train
        .into_iter()
        .filter(|ex| !held_out.contains(&detect_duplicate_key(ex)))
        .collect();

    let test_keys = key_set(&test);
    let valid: Vec<_> = valid
        .into_iter()
        .filter(|ex| !test_keys.contains(&detect_duplicate_key(ex)))
        .collect();

    (train, valid, test)
}

const CURRENCY_CHARS: &[char] = &['$', '€', '£', '¥', '₫', '¢', '₹', '₩'];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_dash(c: char) -> bool {
    c == '-' || c == '–'
}

/// Classifies one stripped punctuation character. `standalone` marks a
/// character that forms a whole whitespace token by itself, which is how
/// clause-delimiting dashes appear.
fn classify_punct(c: char, standalone: bool) -> PunctClass {
    match c {
        ',' | ':' => PunctClass::Comma,
        '.' | '!' | ';' => PunctClass::Period,
        '?' => PunctClass::Question,
        _ if is_dash(c) && standalone => PunctClass::Comma,
        _ => PunctClass::None,
    }
}

/// Token-level labels shared by restoration synthesis and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorationLabels {
    /// Lowercase punctuation-stripped tokens.
    pub tokens: Vec<String>,
    pub slots: Vec<PunctSlot>,
    pub caps: Vec<bool>,
}

/// Extracts restoration labels from true-case punctuated text.
///
/// A non-word character survives stripping when it is flanked by digits on
/// both sides (decimal and grouping separators, times, ranges), when it is
/// a currency symbol next to a digit, or when it is a dash joining two
/// word characters. Everything else is removed and labeled by the class
/// map.
pub fn extract_restoration_labels(text: &str) -> RestorationLabels {
    let mut tokens: Vec<String> = Vec::new();
    let mut slots: Vec<PunctSlot> = Vec::new();
    let mut caps: Vec<bool> = Vec::new();

    for raw in text.split_whitespace() {
        let chars: Vec<char> = raw.chars().collect();
        let standalone = chars.len() == 1;
        let mut kept = String::new();
        let mut capitalized = false;
        let mut pending: Vec<(PunctClass, char)> = Vec::new();

        for (i, &c) in chars.iter().enumerate() {
            let prev = if i > 0 { Some(chars[i - 1]) } else { None };
            let next = chars.get(i + 1).copied();
            let keep = if is_word_char(c) {
                true
            } else if prev.is_some_and(|p| p.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit())
            {
                true
            } else if CURRENCY_CHARS.contains(&c)
                && (prev.is_some_and(|p| p.is_ascii_digit())
                    || next.is_some_and(|n| n.is_ascii_digit()))
            {
                true
            } else if is_dash(c)
                && prev.is_some_and(is_word_char)
                && next.is_some_and(is_word_char)
            {
                true
            } else {
                false
            };

            if keep {
                if c.is_uppercase() {
                    capitalized = true;
                }
                kept.extend(c.to_lowercase());
            } else {
                pending.push((classify_punct(c, standalone), c));
            }
        }

        if kept.is_empty() {
            // The whole token was punctuation; its slots attach after the
            // previous emitted token.
            let gap = tokens.len();
            slots.extend(pending.into_iter().map(|(class, ch)| PunctSlot {
                gap,
                class,
                ch,
            }));
        } else {
            tokens.push(kept);
            caps.push(capitalized);
            let gap = tokens.len();
            slots.extend(pending.into_iter().map(|(class, ch)| PunctSlot {
                gap,
                class,
                ch,
            }));
        }
    }

    RestorationLabels { tokens, slots, caps }
}

/// Builds a restoration pair from clean text: the input is the text
/// lowercased with punctuation removed (number and currency formats
/// retained), the target is the whitespace-normalized original, and the
/// labels record what was stripped where.
pub fn synthesize_restoration_pair(text: &str) -> RestorationPair {
    let labels = extract_restoration_labels(text);
    let target = text.split_whitespace().collect::<Vec<_>>().join(" ");
    RestorationPair {
        input: labels.tokens.join(" "),
        target,
        slots: labels.slots,
        caps: labels.caps,
    }
}

/// Abbreviations that may end in a sentence terminator without closing the
/// sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "TP.", "Tp.", "TS.", "ThS.", "GS.", "PGS.", "BS.", "KS.", "Q.", "P.", "Mr.", "Mrs.", "Dr.",
    "St.",
];

fn is_sentence_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ';')
}

/// Rule-based sentence splitting: a sentence ends at a token whose last
/// character is one of `. ! ? ;` when the next token starts with an
/// uppercase letter or a digit, unless the token is a listed
/// abbreviation. Joining the sentences with single spaces reproduces the
/// whitespace-normalized input.
pub fn split_sentences_with(text: &str, abbreviations: &[&str]) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        current.push(tok);
        let ends = tok.chars().last().is_some_and(is_sentence_terminator)
            && !abbreviations.contains(tok)
            && tokens.get(i + 1).is_some_and(|next| {
                next.chars()
                    .next()
                    .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
            });
        if ends {
            sentences.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(current.join(" "));
    }
    sentences
}

pub fn split_sentences(text: &str) -> Vec<String> {
    split_sentences_with(text, DEFAULT_ABBREVIATIONS)
}

/// Replaces every underscore with a space, turning word-mode text back
/// into syllable-mode text. Idempotent on syllable-mode text.
pub fn detokenize_words(text: &str) -> String {
    text.replace('_', " ")
}
