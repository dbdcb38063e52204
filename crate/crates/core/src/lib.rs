//! Region-aware reinforcement learning for table question answering.
//!
//! The crate provides, bottom-up:
//!
//! - [`table`]: tables, table regions, sub-table extraction, and region
//!   declarations embedded in response text;
//! - [`reward`]: the binary answer reward, the row/column IoU region reward,
//!   the exponentially decaying region weight, and the mixed reward;
//! - [`advantage`]: group-relative advantage normalization with its exact
//!   region/answer decomposition and the consistency penalty;
//! - [`objective`]: the clipped, KL-regularized surrogate objective;
//! - [`sim`]: a desk-scale synthetic table-QA environment with a small
//!   parametric policy, group sampling, and a training loop comparing
//!   GRPO, fixed-weight TARPO, and decaying-weight TARPO.

pub mod advantage;
pub mod objective;
pub mod reward;
pub mod sim;
pub mod table;

pub use advantage::{GroupAdvantages, GroupRewards, RolloutAdvantage};
pub use objective::{ObjectiveTerm, RolloutLogProbs};
pub use reward::{AnswerSpec, RewardConfig};
pub use table::{RawRegion, ReasoningKind, RegionAnnotatedResponse, Table, TableRegion};
