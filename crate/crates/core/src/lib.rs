//! Direct integrals of Hilbert spaces over finite atomic measure spaces,
//! decomposable operators acting fiberwise on them, and the C₀-semigroups
//! those operators generate.
//!
//! A direct integral is modelled by a [`MeasureSpace`] of weighted atoms and a
//! [`FiberSpec`] giving the dimension of the fiber over each atom. Operators are
//! [`OperatorField`]s, one block per atom. Everything acts block by block.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bundle;
pub mod classes;
pub mod decomp_op;
pub mod error;
pub mod gallery;
pub mod grid;
pub mod linalg;
pub mod measure_space;
pub mod semigroup;

pub use asymptotics::{DecayReport, EquivalenceVerdict, Hypothesis};
pub use bundle::{FiberSpec, Section};
pub use decomp_op::{OperatorField, SpectrumReport};
pub use error::{Error, Result};
pub use gallery::GeneratorFamily;
pub use linalg::{CMatrix, CVector};
pub use measure_space::{Atom, AtomId, MeasureSpace};
pub use semigroup::{DirectSemigroup, ExpBound};
