//! Gain/loss discrete NLS lattices: right-hand sides, time integration,
//! plane-wave and modulation-instability analysis, and Ablowitz–Ladik
//! proximity estimates.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod lattice;
pub mod proximity;
pub mod quadrature;
pub mod timestep;

pub use analysis::{
    attractor_verdict, mi_growth_oracle, mi_roots, mi_scan, spectrum, AttractorVerdict, GrowthFit, MiScan,
    PlaneWaveFamily, SpectrumFrame,
};
pub use error::{Error, Result};
pub use lattice::{
    critical_amplitude, make_initial_condition, solvability_gate, BackgroundSpec, Boundary, ComplexState,
    GeneralizedBcSpec, InitialCondition, LatticeConfig, NodeGrid, C64,
};
pub use proximity::{DpsParams, ProximityReport};
pub use timestep::{integrate, IntegratorSpec, Method, System, Trajectory};
