//! Force-noise spectra of a cavity optomechanical sensor with an intracavity
//! parametric amplifier and a negative-mass atomic ensemble.
//!
//! Closed-form spectra live in [`spectra`]; [`oracle`] recomputes them from the
//! 6×6 drift matrix by direct linear solves. [`sweep`] builds parameter scans
//! and figure datasets on top of both.

pub mod constants;
pub mod error;
pub mod optimize;
pub mod oracle;
pub mod params;
pub mod response;
pub mod spectra;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};
pub use params::{
    derive, derive_at_coupling, power_for_coupling, AtomCoupling, AtomDampingConvention,
    DerivedState, DriftRow5Sign, ParamsConfig, SystemParams, ThermalModel,
};
pub use spectra::{SpectrumSeries, SpectrumSource};
pub use table::OutputTable;
