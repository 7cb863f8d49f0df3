//! Exact algebra of the two active two-dimensional spaces of the field.
//!
//! A partially polarized beam is written in Schmidt form
//! `κ₁|u₁⟩|f₁⟩ + κ₂|u₂⟩|f₂⟩`, where `|u⟩` are polarization unit vectors and
//! `|f⟩` are unit-normalized, statistically orthogonal amplitude processes.
//! Only two function-space directions are ever populated, so a beam is
//! represented exactly by a 2x2 complex matrix `M` whose rows index the
//! polarization basis and whose columns index the function basis.
//!
//! Rotations follow the convention
//!
//! ```text
//! |u₁ᵃ⟩ = cos a |u₁⟩ − sin a |u₂⟩
//! |u₂ᵃ⟩ = sin a |u₁⟩ + cos a |u₂⟩
//! ```
//!
//! and identically for `|fₖᵇ⟩`. Coefficients re-expressed in a rotated basis
//! transform with `R(a) = [[cos a, −sin a], [sin a, cos a]]`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// 2x2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `κ₁² + κ₂² = 1`.
pub const SCHMIDT_NORM_TOL: f64 = 1e-12;

/// An angle in radians. Values are kept as given; comparisons wrap.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const QUARTER_TURN: Angle = Angle(FRAC_PI_2);

    pub fn new(radians: f64) -> Self {
        debug_assert!(radians.is_finite(), "angle must be finite");
        Angle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        Angle(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Difference `self − other` wrapped into `(−π, π]`.
    pub fn wrapped_diff(self, other: Angle) -> f64 {
        let d = (self.0 - other.0).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    }

    pub fn approx_eq(self, other: Angle, tol: f64) -> bool {
        self.wrapped_diff(other).abs() <= tol
    }

    pub fn cos(self) -> f64 {
        self.0.cos()
    }

    pub fn sin(self) -> f64 {
        self.0.sin()
    }
}

impl From<f64> for Angle {
    fn from(radians: f64) -> Self {
        Angle::new(radians)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle(-self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

/// Schmidt coefficients `(κ₁, κ₂)` with `κ₁² + κ₂² = 1` and `κ₁ ≥ κ₂ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchmidtPair {
    kappa1: f64,
    kappa2: f64,
}

impl SchmidtPair {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self> {
        if !(kappa1.is_finite() && kappa2.is_finite()) {
            return Err(invalid("Schmidt coefficients must be finite"));
        }
        if kappa1 < 0.0 || kappa2 < 0.0 {
            return Err(invalid(format!(
                "Schmidt coefficients must be non-negative, got ({kappa1}, {kappa2})"
            )));
        }
        let norm = kappa1 * kappa1 + kappa2 * kappa2;
        if (norm - 1.0).abs() > SCHMIDT_NORM_TOL {
            return Err(invalid(format!(
                "κ₁² + κ₂² = {norm}, expected 1 (within {SCHMIDT_NORM_TOL:e})"
            )));
        }
        if kappa1 < kappa2 - SCHMIDT_NORM_TOL {
            return Err(invalid(format!("κ₁ ≥ κ₂ is required, got ({kappa1}, {kappa2})")));
        }
        // Rounding can leave κ₂ a hair above κ₁ at the equal-weight point.
        Ok(SchmidtPair {
            kappa1,
            kappa2: kappa2.min(kappa1),
        })
    }

    /// Pair with the given leading coefficient; `κ₂ = √(1 − κ₁²)`.
    pub fn from_kappa1(kappa1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa1) {
            return Err(invalid(format!("κ₁ must lie in [0, 1], got {kappa1}")));
        }
        SchmidtPair::new(kappa1, (1.0 - kappa1 * kappa1).max(0.0).sqrt())
    }

    /// `κ₁ = κ₂ = 1/√2`.
    pub fn unpolarized() -> Self {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        SchmidtPair { kappa1: k, kappa2: k }
    }

    /// `κ = (1, 0)`, a separable beam.
    pub fn polarized() -> Self {
        SchmidtPair {
            kappa1: 1.0,
            kappa2: 0.0,
        }
    }

    pub fn kappa1(self) -> f64 {
        self.kappa1
    }

    pub fn kappa2(self) -> f64 {
        self.kappa2
    }

    /// `κ₁κ₂`, the entanglement weight entering the correlation.
    pub fn product(self) -> f64 {
        self.kappa1 * self.kappa2
    }

    /// `κ₁² − κ₂²`, the degree of polarization.
    pub fn dop(self) -> f64 {
        self.kappa1 * self.kappa1 - self.kappa2 * self.kappa2
    }
}

/// First or second member of a two-element basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    First,
    Second,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::First, Component::Second];

    pub fn index(self) -> usize {
        match self {
            Component::First => 0,
            Component::Second => 1,
        }
    }

    /// 1-based label as written in `P_jk`.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1 => Ok(Component::First),
            2 => Ok(Component::Second),
            other => Err(invalid(format!("basis index must be 1 or 2, got {other}"))),
        }
    }

    /// Analyzer offset that turns the first rotated vector into this one
    /// (up to sign): `|u₂ᵃ⟩ ∝ |u₁^{a+π/2}⟩`.
    pub fn offset(self) -> Angle {
        match self {
            Component::First => Angle::ZERO,
            Component::Second => Angle::QUARTER_TURN,
        }
    }
}

/// Coefficients on the polarization basis `|u₁⟩, |u₂⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolVector {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl PolVector {
    pub fn new(c1: Complex64, c2: Complex64) -> Self {
        PolVector { c1, c2 }
    }

    pub fn real(c1: f64, c2: f64) -> Self {
        PolVector::new(Complex64::new(c1, 0.0), Complex64::new(c2, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }
}

/// Labels `|f₁ᵇ⟩` or `|f₂ᵇ⟩`, a rotation of the reference Schmidt functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunBasisLabel {
    pub index: Component,
    pub rotation: Angle,
}

impl FunBasisLabel {
    pub fn new(index: Component, rotation: Angle) -> Self {
        FunBasisLabel { index, rotation }
    }

    /// Real weights `(w₁, w₂)` with `|fₖᵇ⟩ = w₁|f₁⟩ + w₂|f₂⟩`.
    pub fn weights(&self) -> [f64; 2] {
        let r = rotation(self.rotation);
        r[self.index.index()]
    }
}

/// `R(a)`: maps coefficients on a basis to coefficients on its `a`-rotated copy.
pub fn rotation(angle: Angle) -> [[f64; 2]; 2] {
    let (s, c) = angle.radians().sin_cos();
    [[c, -s], [s, c]]
}

/// Re-express polarization coefficients in the `a`-rotated basis.
pub fn rotate_pol(v: PolVector, a: Angle) -> PolVector {
    let r = rotation(a);
    PolVector {
        c1: v.c1 * r[0][0] + v.c2 * r[0][1],
        c2: v.c1 * r[1][0] + v.c2 * r[1][1],
    }
}

/// A beam as polarization x function-space coefficients.
///
/// The physical amplitude is `√reference_intensity · global_phase · M`, so the
/// intensity is `reference_intensity · ‖M‖²_F`. Splitting a beam halves the
/// reference intensity and leaves `M` untouched; the beam-splitter factor `i`
/// goes into `global_phase`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    reference_intensity: f64,
    coeffs: Mat2,
    pol_frame: Angle,
    fun_frame: Angle,
    global_phase: Complex64,
}

impl BeamState {
    /// Beam with coefficient matrix `coeffs` in the reference frames.
    pub fn new(reference_intensity: f64, coeffs: Mat2) -> Result<Self> {
        if !(reference_intensity.is_finite() && reference_intensity >= 0.0) {
            return Err(invalid(format!(
                "beam intensity must be finite and non-negative, got {reference_intensity}"
            )));
        }
        let norm = frobenius_sqr(&coeffs);
        if norm > 1.0 + 1e-12 {
            return Err(invalid(format!("coefficient matrix norm² {norm} exceeds 1")));
        }
        Ok(BeamState {
            reference_intensity,
            coeffs,
            pol_frame: Angle::ZERO,
            fun_frame: Angle::ZERO,
            global_phase: ONE,
        })
    }

    /// The Schmidt-form source beam `√I (κ₁|u₁⟩|f₁⟩ + κ₂|u₂⟩|f₂⟩)`.
    pub fn schmidt(schmidt: SchmidtPair, intensity: f64) -> Result<Self> {
        let k1 = Complex64::new(schmidt.kappa1(), 0.0);
        let k2 = Complex64::new(schmidt.kappa2(), 0.0);
        BeamState::new(intensity, [[k1, ZERO], [ZERO, k2]])
    }

    pub fn intensity(&self) -> f64 {
        self.reference_intensity * frobenius_sqr(&self.coeffs)
    }

    pub fn reference_intensity(&self) -> f64 {
        self.reference_intensity
    }

    pub fn coeffs(&self) -> &Mat2 {
        &self.coeffs
    }

    pub fn pol_frame(&self) -> Angle {
        self.pol_frame
    }

    pub fn fun_frame(&self) -> Angle {
        self.fun_frame
    }

    pub fn global_phase(&self) -> Complex64 {
        self.global_phase
    }

    /// `√I_ref · phase · M`, the coefficients of the physical amplitude.
    pub fn amplitude(&self) -> Mat2 {
        let scale = self.global_phase * self.reference_intensity.sqrt();
        map(&self.coeffs, |z| z * scale)
    }

    /// The same beam with `M` re-expressed in the given frames.
    pub fn in_frames(&self, pol_frame: Angle, fun_frame: Angle) -> BeamState {
        let rp = rotation(pol_frame - self.pol_frame);
        let rf = rotation(fun_frame - self.fun_frame);
        BeamState {
            coeffs: rotate_both(&self.coeffs, &rp, &rf),
            pol_frame,
            fun_frame,
            ..self.clone()
        }
    }

    /// Multiply the physical amplitude by `factor`.
    pub fn scaled(&self, factor: Complex64) -> BeamState {
        let modulus = factor.norm();
        if modulus == 0.0 {
            return self.zeroed();
        }
        BeamState {
            reference_intensity: self.reference_intensity * modulus * modulus,
            global_phase: self.global_phase * (factor / modulus),
            ..self.clone()
        }
    }

    pub fn zeroed(&self) -> BeamState {
        BeamState {
            coeffs: [[ZERO; 2]; 2],
            ..self.clone()
        }
    }

    /// Coherent sum of two beams, expressed in `self`'s frames.
    pub fn superpose(&self, other: &BeamState) -> BeamState {
        let other = other.in_frames(self.pol_frame, self.fun_frame);
        let a = self.amplitude();
        let b = other.amplitude();
        let sum = [
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ];
        let reference = (self.reference_intensity.sqrt() + other.reference_intensity.sqrt()).powi(2);
        let coeffs = if reference > 0.0 {
            let inv = 1.0 / reference.sqrt();
            map(&sum, |z| z * inv)
        } else {
            [[ZERO; 2]; 2]
        };
        BeamState {
            reference_intensity: reference,
            coeffs,
            pol_frame: self.pol_frame,
            fun_frame: self.fun_frame,
            global_phase: ONE,
        }
    }

    /// Re-express in the function frame `b`; entries of the second function
    /// column at rounding level are flushed to zero.
    pub(crate) fn settle_function_frame(&self, b: Angle) -> BeamState {
        let mut out = self.in_frames(self.pol_frame, b);
        let scale = frobenius_sqr(&out.coeffs).sqrt();
        let floor = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        for row in out.coeffs.iter_mut() {
            if row[1].norm() <= floor {
                row[1] = ZERO;
            }
        }
        out
    }

    /// `M` expressed in the reference (Schmidt) frames.
    pub fn reference_coeffs(&self) -> Mat2 {
        self.in_frames(Angle::ZERO, Angle::ZERO).coeffs
    }
}

/// Re-express the function-basis columns of the beam in the `b`-rotated basis.
pub fn rotate_fun(m: &BeamState, b: Angle) -> BeamState {
    m.in_frames(m.pol_frame, m.fun_frame + b)
}

/// Re-express the polarization rows of the beam in the `a`-rotated basis.
pub fn rotate_pol_beam(m: &BeamState, a: Angle) -> BeamState {
    m.in_frames(m.pol_frame + a, m.fun_frame)
}

/// Apply the ideal polarizer `|u₁ᵃ⟩⟨u₁ᵃ|`, with `axis` measured in the
/// reference polarization basis. The frames of the beam are unchanged.
pub fn project_pol(beam: &BeamState, axis: Angle) -> BeamState {
    // Coefficients of |u₁ᵃ⟩ in the beam's current polarization frame.
    let n = rotation(axis - beam.pol_frame)[0];
    let m = &beam.coeffs;
    let mut coeffs = [[ZERO; 2]; 2];
    for k in 0..2 {
        let along = m[0][k] * n[0] + m[1][k] * n[1];
        coeffs[0][k] = along * n[0];
        coeffs[1][k] = along * n[1];
    }
    BeamState { coeffs, ..beam.clone() }
}

/// Direct joint projection `P_jk(a, b) = |⟨fₖᵇ|⟨uⱼᵃ|e⟩|²` of the normalized beam.
///
/// Zero beams project to zero.
pub fn joint_projection(beam: &BeamState, a: Angle, b: Angle, j: Component, k: Component) -> f64 {
    let norm = frobenius_sqr(&beam.coeffs);
    if norm == 0.0 {
        return 0.0;
    }
    let m = beam.reference_coeffs();
    let ra = rotation(a)[j.index()];
    let rb = rotation(b)[k.index()];
    let mut amp = ZERO;
    for (p, wa) in ra.iter().enumerate() {
        for (q, wb) in rb.iter().enumerate() {
            amp += m[p][q] * (wa * wb);
        }
    }
    amp.norm_sqr() / norm
}

pub fn frobenius_sqr(m: &Mat2) -> f64 {
    m.iter().flatten().map(|z| z.norm_sqr()).sum()
}

fn map(m: &Mat2, f: impl Fn(Complex64) -> Complex64) -> Mat2 {
    [[f(m[0][0]), f(m[0][1])], [f(m[1][0]), f(m[1][1])]]
}

/// `Rp · M · Rfᵀ`.
fn rotate_both(m: &Mat2, rp: &[[f64; 2]; 2], rf: &[[f64; 2]; 2]) -> Mat2 {
    let mut left = [[ZERO; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            left[i][k] = m[0][k] * rp[i][0] + m[1][k] * rp[i][1];
        }
    }
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            out[i][k] = left[i][0] * rf[k][0] + left[i][1] * rf[k][1];
        }
    }
    out
}
