//! Generalized Clifford group on one qudit: symplectic representation,
//! unitary synthesis, classical shadows and the twirling channel.

pub mod shadows;
pub mod symplectic;
pub mod synthesis;
pub mod twirl;

pub use symplectic::{enumerate_symplectic, sample_symplectic, symplectic_group_order, SymplecticMat2};
pub use synthesis::{
    enumerate_cliffords, sample_clifford_with, synthesize_clifford, CliffordCache, CliffordElement,
};
