//! Verification engine for flat lossy channel machines with a single channel.
//!
//! The crate decides coverability, exact reachability, nontermination,
//! Büchi acceptance, unboundedness and repeated coverability. Every positive
//! reachability answer comes with a compact witness (channel contents stored
//! as straight-line programs) that [`solver::validate_witness`] re-checks
//! without trusting the search.

pub mod acceleration;
pub mod gen;
pub mod machine;
pub mod oracle;
pub mod slp;
pub mod solver;
pub mod words;

pub use machine::{Action, ActionSeq, Dir, FlatnessInfo, LocationId, Machine, Rule, RuleId};
pub use words::{Letter, Word};
