//! Finite equivariant truncations of the Podles quantum spheres:
//! representations, Dirac operators, real structures, Fredholm modules and
//! index pairings, with a verification battery over all of it.

pub mod bandop;
pub mod basis;
pub mod chern_index;
pub mod dirac_real;
pub mod qcore;
pub mod report;
pub mod sphere_gen;
pub mod sphere_std;

pub use bandop::{classify_kq, BandOperator, DecayProfile, KqClass, OpError, DECAY_FLOOR};
pub use basis::{Basis, BasisKind, Label};
pub use qcore::{DeformationParams, HalfInt, ParamError};
pub use report::{CheckResult, PairingReport, VerificationReport};
