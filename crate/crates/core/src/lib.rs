//! Vietnamese sequence-to-sequence toolkit.
//!
//! The crate covers the full desk-scale pipeline for denoising
//! autoencoder pre-training and seq2seq fine-tuning of Vietnamese text
//! at syllable or word granularity:
//!
//! - [`corpus`]: dataset ingestion, split deduplication, sentence
//!   splitting, word-mode detokenization, and synthesis of
//!   capitalization/punctuation restoration pairs from clean text.
//! - [`tokenizer`]: byte-pair-encoding vocabulary training, encoding and
//!   decoding with end-of-word markers and reserved special tokens.
//! - [`noising`]: sentence-block construction, sentence permutation and
//!   Poisson-span text infilling.
//! - [`model`]: a transformer encoder-decoder with GeLU activations,
//!   tied embeddings, final encoder/decoder layer norms, exact
//!   backpropagation, and a binary checkpoint format.
//! - [`training`]: Adam with warmup/decay scheduling, token-budget
//!   batching, the pre-training loop and the grid-search fine-tuning
//!   loop with checkpoint selection.
//! - [`decoding`]: beam search and greedy decoding.
//! - [`evaluation`]: detokenized case-sensitive ROUGE-1/2/L and
//!   alignment-based capitalization / punctuation restoration F1.

pub mod corpus;
pub mod decoding;
pub mod evaluation;
pub mod model;
pub mod noising;
pub mod tokenizer;
pub mod training;

pub use corpus::{PunctClass, RestorationPair, SummarizationExample, TextGranularity};
pub use model::{ModelConfig, Parameters};
pub use noising::{DenoisingExample, NoiseConfig, SentenceBlock};
pub use tokenizer::{SpecialToken, Vocabulary};
pub use training::TrainConfig;
