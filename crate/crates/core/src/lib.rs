//! Quantization of lumped-element LC circuits.
//!
//! The pipeline runs netlist → topology → Lagrangian → Hamiltonian → dynamics:
//!
//! * [`netlist`] parses and validates two-terminal C/L circuits.
//! * [`topology`] builds a ground-rooted spanning tree, the fundamental loop
//!   basis, and diagnoses passive nodes and loops.
//! * [`lagrangian`] assembles quadratic Lagrangians in node-flux, loop-charge
//!   and extended (node flux + loop flux) coordinates, optionally augmented
//!   with geometric capacitances and loop self-inductances.
//! * [`quantize`] performs the Legendre transform, finds normal modes and
//!   Gaussian ground states.
//! * [`simulate`] evolves classical trajectories and Gaussian moments and
//!   extracts per-component voltages and currents.
//!
//! Trajectory evaluation is data-parallel over time samples. With the
//! `parallel` feature (default) it runs on rayon; without it every
//! [`Exec`] choice runs sequentially and produces identical output.

pub mod lagrangian;
pub mod linalg;
pub mod netlist;
mod par;
#[cfg(test)]
mod properties;
pub mod quantize;
pub mod simulate;
pub mod topology;

pub use lagrangian::{
    assemble, augment_geometric, extended_node_lagrangian, loop_lagrangian, node_lagrangian, Assembled, Augmentation,
    GeometricKey, GeometricMode, GeometricPolicy, QuadraticLagrangian, Representation,
};
pub use netlist::{parse_netlist, validate_circuit, Circuit, Component, ComponentKind};
pub use par::Exec;
pub use quantize::{
    diagnose_quantizability, ground_state, legendre_transform, mode_attribution, normal_modes, GaussianState,
    HamiltonianSystem, ModeDecomposition, QuantizabilityDiagnosis, HBAR,
};
pub use simulate::{evolve_leapfrog, evolve_modes, initial_state, observables, Trajectory};
pub use topology::{Topology, TopologyReport};

/// Crate-wide error; each module also exposes its own error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Netlist(#[from] netlist::NetlistError),
    #[error(transparent)]
    Topology(#[from] topology::TopologyError),
    #[error(transparent)]
    Lagrangian(#[from] lagrangian::LagrangianError),
    #[error(transparent)]
    Quantize(#[from] quantize::QuantizeError),
    #[error(transparent)]
    Simulate(#[from] simulate::SimulateError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
