//! Simulation and statistical verification of slightly supercritical
//! Galton–Watson forests encoded by Łukasiewicz paths and height processes,
//! the pathwise spine construction of the walk conditioned on survival, and
//! the percolated configuration model in the critical window.
//!
//! The crate is organized around the objects it simulates:
//!
//! * [`walk`] — Łukasiewicz paths, the O(n) height process, the
//!   future-infimum transform.
//! * [`law`] — offspring distributions, step Laplace transforms, the
//!   tilting root ξ and the tilted (subcritical) law.
//! * [`pathwise`] — the joint spine construction of `(S, S − S̲̲, H)` and
//!   the direct i.i.d. sampler used as its law oracle.
//! * [`stable`] — closed-form spectrally positive α-stable references:
//!   Laplace exponents, the continuum root, the size-biased-walk transform,
//!   and a calibrated marginal sampler.
//! * [`config_model`] — percolated power-law degrees, size-biased ordering,
//!   the stack-based depth-first multigraph exploration, and the
//!   measure-change diagnostics.
//! * [`harness`] — rescaling, empirical distributions, two-sample KS, and
//!   the named Monte Carlo experiments.

pub mod config_model;
pub mod configfile;
pub mod experiments;
pub mod harness;
pub mod law;
pub mod pathwise;
pub mod quad;
pub mod report;
pub mod rng;
pub mod stable;
pub mod svg;
pub mod walk;

pub use law::{extinction_probability, find_xi, tilt, OffspringLaw, TiltRoot};
pub use pathwise::{build_pathwise, sample_direct, PathwiseBundle, PathwiseSampler, SpinePair};
pub use rng::{SeedTree, Stream};
pub use stable::StableRef;
pub use walk::{future_infimum_transform, height_process, lukasiewicz_from_degrees, HeightSeq, Path};
