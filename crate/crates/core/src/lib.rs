//! Extension models: sparse variable-length context models whose contexts
//! and per-context symbol sets are chosen by minimum description length.

pub mod codec;
pub mod corpus;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod mdl;
pub mod model;
pub mod select;

pub use corpus::{Alphabet, AlphabetProfile, ContextStats, NodeId, Symbol, SymbolSequence};
pub use error::{Error, Result};
pub use estimate::{ContextEstimate, Ratio};
pub use model::{ContextEntry, Extension, ExtensionModel, ValidationReport, Violation};
pub use select::{fit, CostMode, DeltaLedger, FitOutcome, SelectionConfig};
pub use codec::{decode, encode, CodedStream};
pub use eval::{message_entropy, EvalReport, NgramModel};
pub use mdl::{total_codelength, CodelengthReport};
