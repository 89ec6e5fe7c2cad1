//! Asymptotic densities of subsets of ℕ, weighted density variants, and hitting-set
//! classification for weighted backward shifts.

pub mod density;
pub mod dynamics;
pub mod examples_gen;
pub mod families;
pub mod intset;
pub mod setspec;
pub mod suite;
pub mod value;
pub mod weights;

pub use density::{evaluate, DensityKind, DensityResult, EvalConfig, KindTag};
pub use intset::{IntegerSet, Interval, SetError, SetOp};
pub use value::{ExtValue, Rational, Tri};
pub use weights::{Base, WeightKind, WeightSequence};
