//! Find and remove intermediate merge residue from BPE vocabularies.
//!
//! Residue tokens are produced by merges but almost never survive in an
//! encoding: they exist mainly as stepping stones toward longer tokens. The
//! crate encodes a corpus with a full merge trace, scores every token by how
//! often it survives versus how often it is consumed, and builds a pruned
//! tokenizer that splits removed tokens and re-merges the affected pretokens.
//!
//! ```
//! use litetoken_core::{train_tiny, PretokenizerConfig, LiteTokenizer, EncodeMode};
//!
//! let docs = ["low lower lowest", "new newer newest"];
//! let model = train_tiny(&docs, 30, &PretokenizerConfig::default()).unwrap();
//! let lite = LiteTokenizer::new(model, Default::default()).unwrap();
//! let ids = lite.encode(b"lower", EncodeMode::SplitRemerge).unwrap().ids;
//! assert_eq!(lite.decode(&ids).unwrap(), b"lower");
//! ```

pub mod display;
pub mod encode;
pub mod error;
pub mod format;
pub mod graph;
pub mod lite;
pub mod load;
pub mod model;
pub mod pretokenize;
pub mod residue;
pub mod savings;
pub mod stats;
pub mod train;

pub use encode::{EncodeTrace, Formation, PretokenSpan, TraceNode};
pub use error::{Error, Result};
pub use format::NativeModel;
pub use graph::{DescendantSet, MergeGraph, TreeNode};
pub use lite::{EncodeMode, ImrFile, IncrementalEncoder, LiteEncoding, LiteTokenizer, MaskExport};
pub use load::{load_hf, load_hf_with, load_tiktoken, load_tiktoken_with, HfOptions};
pub use model::{Flavor, MergeRule, ModelParts, TokenId, TokenizerModel};
pub use pretokenize::{Pretokenizer, PretokenizerConfig};
pub use residue::{classify, sweep, Category, ClassifyOptions, ResidueReport, Thresholds};
pub use savings::{estimate, SavingsInput, SavingsReport};
pub use stats::{accumulate, merge_shards, AccumulateOptions, Accumulator, CorpusStats, F2Mode, NeighborScope};
pub use train::{train, train_tiny, Alphabet, TrainOptions};
