//! The alternation-free modal mu-calculus: formula algebra, the annotated
//! cyclic Focus proof system, tableau games, model checking and Craig
//! interpolation from partitioned proofs.

pub mod formula;
pub mod games;
pub mod generate;
pub mod interpolation;
pub mod proofs;
pub mod prover;
pub mod semantics;
pub mod tableaux;

pub use formula::{parse, Fix, Formula, Kind};
pub use games::Player;
pub use proofs::{check_proof, Proof, Sequent};
pub use prover::{decide, Verdict};
pub use semantics::KripkeModel;

/// Version of the proof, model and tableau JSON formats.
pub const SCHEMA_VERSION: u32 = 1;
