//! The denoising corruption used for pre-training: sentence permutation
//! within fixed-size token blocks and Poisson-span text infilling.
//!
//! Everything here is pure given an explicit RNG; callers noise distinct
//! blocks concurrently by splitting independent streams from one seed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::{BOS_ID, EOS_ID, MASK_ID};

/// Corruption parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Mean of the Poisson span-length distribution.
    pub poisson_lambda: f64,
    /// Fraction of tokens to cover with masked spans.
    pub mask_fraction: f64,
    /// Target token count per sentence block.
    pub block_size: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            poisson_lambda: 3.5,
            mask_fraction: 0.30,
            block_size: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("poisson_lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("mask_fraction must lie in [0, 1], got {0}")]
    MaskFractionOutOfRange(f64),
    #[error("block_size must be at least 2, got {0}")]
    BlockTooSmall(usize),
    #[error("input to text infilling already contains <mask>")]
    MaskInInput,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.poisson_lambda > 0.0) {
            return Err(NoiseError::NonPositiveLambda(self.poisson_lambda));
        }
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(NoiseError::MaskFractionOutOfRange(self.mask_fraction));
        }
        if self.block_size < 2 {
            return Err(NoiseError::BlockTooSmall(self.block_size));
        }
        Ok(())
    }
}

/// A packed block of consecutive sentences with boundary metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceBlock {
    pub tokens: Vec<u32>,
    /// Start offset of each sentence; `starts[0] == 0`.
    pub starts: Vec<usize>,
}

impl SentenceBlock {
    pub fn sentence_count(&self) -> usize {
        self.starts.len()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[u32]> {
        let n = self.starts.len();
        (0..n).map(move |i| {
            let start = self.starts[i];
            let end = if i + 1 < n {
                self.starts[i + 1]
            } else {
                self.tokens.len()
            };
            &self.tokens[start..end]
        })
    }
}

/// A (noised source, original target) pre-training pair, both wrapped in
/// `<s>`/`</s>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoisingExample {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

/// Greedily packs pre-encoded sentences of each document into blocks of at
/// most `block_size` tokens. A sentence that would overflow the current
/// block starts a new one; a single sentence longer than `block_size` is
/// truncated. Blocks never span documents.
pub fn build_blocks(documents: &[Vec<Vec<u32>>], block_size: usize) -> Vec<SentenceBlock> {
    let mut blocks = Vec::new();
    for doc in documents {
        let mut current = SentenceBlock {
            tokens: Vec::new(),
            starts: Vec::new(),
        };
        for sentence in doc {
            if sentence.is_empty() {
                continue;
            }
            let sentence: &[u32] = if sentence.len() > block_size {
                &sentence[..block_size]
            } else {
                sentence
            };
            if !current.tokens.is_empty() && current.tokens.len() + sentence.len() > block_size {
                blocks.push(std::mem::replace(
                    &mut current,
                    SentenceBlock {
                        tokens: Vec::new(),
                        starts: Vec::new(),
                    },
                ));
            }
            current.starts.push(current.tokens.len());
            current.tokens.extend_from_slice(sentence);
        }
        if !current.tokens.is_empty() {
            blocks.push(current);
        }
    }
    blocks
}

/// Uniform random permutation of whole sentences (Fisher-Yates over
/// sentence indices). The token multiset is preserved.
pub fn permute_sentences<R: Rng>(block: &SentenceBlock, rng: &mut R) -> SentenceBlock {
    let sentences: Vec<&[u32]> = block.sentences().collect();
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut tokens = Vec::with_capacity(block.tokens.len());
    let mut starts = Vec::with_capacity(sentences.len());
    for idx in order {
        starts.push(tokens.len());
        tokens.extend_from_slice(sentences[idx]);
    }
    SentenceBlock { tokens, starts }
}

/// Exact Poisson sampler by CDF inversion.
pub fn sample_poisson<R: Rng>(lambda: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut k = 0usize;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

#[derive(Debug, Clone, Copy)]
enum Span {
    /// Replace tokens `start..start + len` with one mask.
    Replace { start: usize, len: usize },
    /// Insert one mask at the gap before original position `gap`.
    Insert { gap: usize },
}

/// Poisson-span text infilling: samples span lengths from Poisson(lambda)
/// until the covered-token count reaches `mask_fraction` of the input,
/// replacing each span with a single `<mask>`. Zero-length spans insert a
/// mask at a uniform random gap and do not count toward coverage. Spans
/// never overlap; span starts are drawn by rejection over uncovered
/// positions.
pub fn text_infilling<R: Rng>(
    tokens: &[u32],
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<u32>, NoiseError> {
    config.validate()?;
    if tokens.iter().any(|&t| t == MASK_ID) {
        return Err(NoiseError::MaskInInput);
    }
    let n = tokens.len();
    let budget = config.mask_fraction * n as f64;
    if budget <= 0.0 || n == 0 {
        return Ok(tokens.to_vec());
    }

    let mut covered = vec![false; n];
    let mut covered_count = 0usize;
    let mut spans: Vec<Span> = Vec::new();

    while (covered_count as f64) < budget && covered_count < n {
        let len = sample_poisson(config.poisson_lambda, rng);
        if len == 0 {
            let gap = rng.gen_range(0..=n);
            spans.push(Span::Insert { gap });
            continue;
        }
        // Rejection-resample the start until it lands on an uncovered
        // position, then extend without crossing an existing span.
        let start = loop {
            let s = rng.gen_range(0..n);
            if !covered[s] {
                break s;
            }
        };
        let mut span_len = 0usize;
        while span_len < len && start + span_len < n && !covered[start + span_len] {
            covered[start + span_len] = true;
            span_len += 1;
        }
        covered_count += span_len;
        spans.push(Span::Replace {
            start,
            len: span_len,
        });
    }

    Ok(materialize(tokens, &spans))
}

/// Applies spans to the token sequence, replacing each covered run with a
/// single mask and splicing in the zero-length insertions.
fn materialize(tokens: &[u32], spans: &[Span]) -> Vec<u32> {
    let n = tokens.len();
    let mut replace_start = vec![false; n + 1];
    let mut covered = vec![false; n];
    let mut inserts_at = vec![0usize; n + 1];
    for span in spans {
        match *span {
            Span::Replace { start, len } => {
                if len > 0 {
                    replace_start[start] = true;
                    for pos in start..start + len {
                        covered[pos] = true;
                    }
                }
            }
            Span::Insert { gap } => inserts_at[gap] += 1,
        }
    }
    let mut out = Vec::with_capacity(n + spans.len());
    for pos in 0..n {
        for _ in 0..inserts_at[pos] {
            out.push(MASK_ID);
        }
        if replace_start[pos] {
            out.push(MASK_ID);
        }
        if !covered[pos] {
            out.push(tokens[pos]);
        }
    }
    for _ in 0..inserts_at[n] {
        out.push(MASK_ID);
    }
    out
}

/// Test hook: materializes a hand-specified span set.
#[doc(hidden)]
pub fn apply_spans_for_tests(
    tokens: &[u32],
    replacements: &[(usize, usize)],
    insertion_gaps: &[usize],
) -> Vec<u32> {
    let mut spans: Vec<Span> = replacements
        .iter()
        .map(|&(start, len)| Span::Replace { start, len })
        .collect();
    spans.extend(insertion_gaps.iter().map(|&gap| Span::Insert { gap }));
    materialize(tokens, &spans)
}

/// Builds one pre-training pair: the target is the original block wrapped
/// in `<s>`/`</s>`; the source applies sentence permutation first, then
/// text infilling.
pub fn make_denoising_example<R: Rng>(
    block: &SentenceBlock,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<DenoisingExample, NoiseError> {
    let permuted = permute_sentences(block, rng);
    let noised = text_infilling(&permuted.tokens, config, rng)?;

    let mut target = Vec::with_capacity(block.tokens.len() + 2);
    target.push(BOS_ID);
    target.extend_from_slice(&block.tokens);
    target.push(EOS_ID);

    let mut source = Vec::with_capacity(noised.len() + 2);
    source.push(BOS_ID);
    source.extend_from_slice(&noised);
    source.push(EOS_ID);

    Ok(DenoisingExample { source, target })
}
