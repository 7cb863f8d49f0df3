//! Polarization tomography: Stokes parameters, degree of polarization and the
//! Schmidt decomposition of the 2x2 coherence matrix.
//!
//! Stokes convention, with `J_ij = ⟨E_i E_j*⟩`:
//!
//! ```text
//! S₀ = J_xx + J_yy    S₁ = J_xx − J_yy
//! S₂ = 2 Re J_xy      S₃ = 2 Im J_xy
//! ```

use log::warn;
use num_complex::Complex64;

use crate::ensemble::FieldEnsemble;
use crate::error::{invalid, Result};
use crate::field::{Angle, Mat2, SchmidtPair};

/// Stokes parameters in intensity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Result<Self> {
        if !(s0.is_finite() && s1.is_finite() && s2.is_finite() && s3.is_finite()) {
            return Err(invalid("Stokes parameters must be finite"));
        }
        if s0 <= 0.0 {
            return Err(invalid(format!("S₀ must be positive, got {s0}")));
        }
        Ok(StokesVector { s0, s1, s2, s3 })
    }

    /// Stokes vector of a coherence matrix.
    pub fn from_coherence(j: &Mat2) -> Result<Self> {
        StokesVector::new(
            j[0][0].re + j[1][1].re,
            j[0][0].re - j[1][1].re,
            2.0 * j[0][1].re,
            2.0 * j[0][1].im,
        )
    }

    /// The polarized-part length `√(S₁² + S₂² + S₃²)`.
    pub fn polarized_magnitude(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }

    /// Scale the polarized part so that it does not exceed `S₀`.
    pub fn clipped(&self) -> StokesVector {
        let p = self.polarized_magnitude();
        if p <= self.s0 {
            return *self;
        }
        let f = self.s0 / p;
        StokesVector {
            s1: self.s1 * f,
            s2: self.s2 * f,
            s3: self.s3 * f,
            ..*self
        }
    }

    /// `(S₁, S₂, S₃) / S₀`.
    pub fn normalized(&self) -> [f64; 3] {
        [self.s1 / self.s0, self.s2 / self.s0, self.s3 / self.s0]
    }

    /// Coherence matrix with these Stokes parameters.
    pub fn coherence(&self) -> Mat2 {
        let xx = 0.5 * (self.s0 + self.s1);
        let yy = 0.5 * (self.s0 - self.s1);
        let xy = Complex64::new(0.5 * self.s2, 0.5 * self.s3);
        [[Complex64::new(xx, 0.0), xy], [xy.conj(), Complex64::new(yy, 0.0)]]
    }
}

/// Stokes parameters estimated from the ensemble's coherence matrix.
pub fn stokes_from_ensemble(e: &FieldEnsemble) -> Result<StokesVector> {
    if e.is_empty() {
        return Err(invalid("ensemble has no samples"));
    }
    StokesVector::from_coherence(&e.coherence())
}

/// Degree of polarization `√(S₁²+S₂²+S₃²)/S₀`, clipped to `[0, 1]`.
pub fn dop(s: &StokesVector) -> Result<f64> {
    if !(s.s0 > 0.0) {
        return Err(invalid(format!("S₀ must be positive, got {}", s.s0)));
    }
    let p = s.polarized_magnitude() / s.s0;
    if p > 1.0 {
        warn!("estimated degree of polarization {p} exceeds 1; clipping");
        return Ok(1.0);
    }
    Ok(p)
}

/// Schmidt coefficients `κ₁ = √((1+P)/2)`, `κ₂ = √((1−P)/2)` of a beam with
/// degree of polarization `P`.
pub fn schmidt_from_dop(p: f64) -> Result<SchmidtPair> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("degree of polarization must lie in [0, 1], got {p}")));
    }
    SchmidtPair::new(((1.0 + p) / 2.0).sqrt(), ((1.0 - p) / 2.0).sqrt())
}

/// Schmidt decomposition of a coherence matrix.
///
/// Returns the Schmidt pair `κᵢ = √(λᵢ / tr J)` and the orientation angle of
/// the major eigen-axis, measured from `|u₁⟩` towards `|u₂⟩`:
/// `θ = ½ atan2(S₂, S₁)`. A degenerate spectrum returns `θ = 0`. When
/// `S₃ ≠ 0` the eigenvectors are complex; `θ` is then the orientation of the
/// polarization ellipse and the ellipticity is not represented.
pub fn schmidt_frame(j: &Mat2) -> Result<(SchmidtPair, Angle)> {
    let xx = j[0][0].re;
    let yy = j[1][1].re;
    let xy = j[0][1];
    let hermitian_tol = 1e-12 * (xx.abs() + yy.abs()).max(f64::MIN_POSITIVE);
    if j[0][0].im.abs() > hermitian_tol
        || j[1][1].im.abs() > hermitian_tol
        || (j[1][0] - xy.conj()).norm() > hermitian_tol
    {
        return Err(invalid("coherence matrix is not Hermitian"));
    }
    let trace = xx + yy;
    if !(trace > 0.0) {
        return Err(invalid(format!("coherence matrix trace must be positive, got {trace}")));
    }
    if xx < -hermitian_tol || yy < -hermitian_tol || xy.norm_sqr() > xx * yy + hermitian_tol * trace {
        return Err(invalid("coherence matrix is not positive semidefinite"));
    }
    let half_gap = 0.5 * (xx - yy);
    let disc = (half_gap * half_gap + xy.norm_sqr()).sqrt();
    let lambda1 = 0.5 * trace + disc;
    let lambda2 = (0.5 * trace - disc).max(0.0);
    let k1 = (lambda1 / trace).sqrt();
    let k2 = (lambda2 / trace).sqrt();
    // Rescale away rounding so the pair meets the normalization invariant.
    let norm = (k1 * k1 + k2 * k2).sqrt();
    let schmidt = SchmidtPair::new(k1 / norm, k2 / norm)?;
    let angle = if disc <= 1e-14 * trace {
        Angle::ZERO
    } else {
        Angle::new(0.5 * (2.0 * xy.re).atan2(xx - yy))
    };
    Ok((schmidt, angle))
}

/// Schmidt decomposition of an ensemble's empirical coherence matrix.
pub fn ensemble_schmidt_frame(e: &FieldEnsemble) -> Result<(SchmidtPair, Angle)> {
    schmidt_frame(&e.coherence())
}

/// Full tomography record of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tomography {
    pub stokes: StokesVector,
    pub dop: f64,
    pub schmidt: SchmidtPair,
    pub frame: Angle,
    pub samples: usize,
}

/// Stokes vector, DOP and Schmidt frame of an ensemble.
pub fn tomography(e: &FieldEnsemble) -> Result<Tomography> {
    let stokes = stokes_from_ensemble(e)?;
    let dop = dop(&stokes)?;
    let (schmidt, frame) = ensemble_schmidt_frame(e)?;
    Ok(Tomography {
        stokes,
        dop,
        schmidt,
        frame,
        samples: e.len(),
    })
}

/// Tomography record from measured Stokes values.
pub fn tomography_from_stokes(stokes: StokesVector) -> Result<Tomography> {
    let stokes = stokes.clipped();
    let dop = dop(&stokes)?;
    let schmidt = schmidt_from_dop(dop)?;
    let (_, frame) = schmidt_frame(&stokes.coherence())?;
    Ok(Tomography {
        stokes,
        dop,
        schmidt,
        frame,
        samples: 0,
    })
}
