//! Simulation of classically entangled stochastic optical fields and the
//! CHSH test performed on them with a calorimetric interferometer.
//!
//! A partially polarized beam is a superposition of two polarization modes,
//! each carrying its own statistically independent amplitude process. The
//! crate provides the exact two-by-two algebra of such beams ([`field`]), a
//! seeded Monte Carlo generator of the field samples ([`ensemble`]),
//! Stokes-parameter tomography ([`polarimetry`]), the interferometric
//! measurement of joint projections ([`interferometer`]), correlation
//! providers ([`correlation`]) and the Bell analysis built on them ([`bell`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod cli;
pub mod correlation;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod interferometer;
pub mod optimize;
pub mod polarimetry;

pub use bell::{
    bell_expanded, chsh, closed_form_max, gisin_settings, gisin_settings_expanded, maximize_bell, maximize_bell_with,
    scan_correlation, BellResult, BellSettings, ScanPoint,
};
pub use correlation::{
    correlation_analytic, correlation_from_quad, Analytic, CorrelationProvider, DirectProjection, EnsembleProjection,
    EnsembleProtocol, SymbolicProtocol,
};
pub use ensemble::{generate, EnsembleParams, Estimate, FieldEnsemble};
pub use error::{Error, Result};
pub use field::{Angle, BeamState, Component, SchmidtPair};
pub use interferometer::{
    measure_joint_projection, measure_quad, stripping_angle, DetectorModel, Interferometer, ProjectionQuad,
};
pub use polarimetry::{dop, schmidt_frame, schmidt_from_dop, tomography, StokesVector, Tomography};
