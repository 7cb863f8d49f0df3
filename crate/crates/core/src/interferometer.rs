//! The modified Mach–Zehnder measurement of joint projections.
//!
//! The source beam is split into a primary and an auxiliary arm. The primary
//! arm passes analyzer `a`. The auxiliary arm passes the stripping polarizer
//! `s(b)`, which leaves only the `|f₁ᵇ⟩` function component, and then analyzer
//! `a`. The arms are recombined on a 50:50 splitter and a calorimetric
//! detector reads the output with both shutters open and with each arm alone.
//! From those intensities
//!
//! ```text
//! P₁₁(a, b) = (2 I_out − I_aux − I_arm)² / (4 I_total I_aux)
//! ```
//!
//! where `I_arm` and `I_aux` are the arm intensities entering the combiner
//! (twice the single-arm detector readings) and `I_total` is the primary-arm
//! intensity before its analyzer. The other `P_jk` come from rotating the
//! analyzers by `π/2` (`j = 2`) and the function angle by `π/2` (`k = 2`).
//!
//! The protocol is written once against the [`Beam`] trait and runs on the
//! exact [`BeamState`] algebra or on sampled fields ([`SampledBeam`]).

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::{Estimate, FieldEnsemble};
use crate::error::{degenerate, invalid, Result};
use crate::field::{self, Angle, BeamState, Component, FunBasisLabel, Mat2, SchmidtPair, I, ONE, ZERO};

/// Auxiliary-arm readings below this fraction of `I_total` are treated as
/// extinguished.
pub const DEGENERATE_FRACTION: f64 = 1e-9;

/// Anything the interferometer can act on.
pub trait Beam: Clone {
    fn intensity(&self) -> f64;

    /// Ideal polarizer along `|u₁^axis⟩`, axis measured in the Schmidt frame.
    fn project_pol(&self, axis: Angle) -> Self;

    /// Multiply the amplitude by a complex factor.
    fn scaled(&self, factor: Complex64) -> Self;

    /// Coherent sum.
    fn superpose(&self, other: &Self) -> Self;

    fn zeroed(&self) -> Self;

    /// Hook applied to the stripped auxiliary beam; symbolic beams use it to
    /// switch to the `b` function frame.
    fn settle_stripped(&self, _b: Angle) -> Self {
        self.clone()
    }
}

impl Beam for BeamState {
    fn intensity(&self) -> f64 {
        BeamState::intensity(self)
    }

    fn project_pol(&self, axis: Angle) -> Self {
        field::project_pol(self, axis)
    }

    fn scaled(&self, factor: Complex64) -> Self {
        BeamState::scaled(self, factor)
    }

    fn superpose(&self, other: &Self) -> Self {
        BeamState::superpose(self, other)
    }

    fn zeroed(&self) -> Self {
        BeamState::zeroed(self)
    }

    fn settle_stripped(&self, b: Angle) -> Self {
        self.settle_function_frame(b)
    }
}

/// A beam derived linearly from an ensemble: `E'(t) = T · E(t)`.
///
/// Intensities are time/ensemble averages over every stored sample.
#[derive(Debug, Clone)]
pub struct SampledBeam<'a> {
    ensemble: &'a FieldEnsemble,
    jones: Mat2,
}

impl<'a> SampledBeam<'a> {
    pub fn source(ensemble: &'a FieldEnsemble) -> Self {
        SampledBeam {
            ensemble,
            jones: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    pub fn ensemble(&self) -> &'a FieldEnsemble {
        self.ensemble
    }

    /// Accumulated Jones matrix relative to the source field.
    pub fn jones(&self) -> &Mat2 {
        &self.jones
    }

    /// `T† T`, the quadratic form whose sample mean is the intensity.
    pub fn intensity_form(&self) -> Mat2 {
        let t = &self.jones;
        let mut h = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = t[0][i].conj() * t[0][j] + t[1][i].conj() * t[1][j];
            }
        }
        h
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = [Complex64; 2]> + '_ {
        let t = self.jones;
        self.ensemble
            .fields()
            .map(move |e| [t[0][0] * e[0] + t[0][1] * e[1], t[1][0] * e[0] + t[1][1] * e[1]])
    }

    /// Per polarization component, the estimate of `⟨g|E'ᵢ⟩` with `g` the
    /// labelled basis process: `(Re, Im)` for `i = 1, 2`.
    pub fn fun_overlap(&self, label: FunBasisLabel) -> [(Estimate, Estimate); 2] {
        let products: Vec<[Complex64; 2]> = self
            .ensemble
            .fun_process(label)
            .zip(self.samples())
            .map(|(g, e)| [g.conj() * e[0], g.conj() * e[1]])
            .collect();
        let est = |i: usize| {
            (
                Estimate::from_samples(products.iter().map(|p| p[i].re)),
                Estimate::from_samples(products.iter().map(|p| p[i].im)),
            )
        };
        [est(0), est(1)]
    }
}

impl Beam for SampledBeam<'_> {
    fn intensity(&self) -> f64 {
        self.ensemble.mean_quadratic(&self.intensity_form())
    }

    fn project_pol(&self, axis: Angle) -> Self {
        let n = field::rotation(axis)[0];
        let t = &self.jones;
        let mut out = [[ZERO; 2]; 2];
        for col in 0..2 {
            let along = t[0][col] * n[0] + t[1][col] * n[1];
            out[0][col] = along * n[0];
            out[1][col] = along * n[1];
        }
        SampledBeam {
            jones: out,
            ..self.clone()
        }
    }

    fn scaled(&self, factor: Complex64) -> Self {
        let t = &self.jones;
        SampledBeam {
            jones: [
                [t[0][0] * factor, t[0][1] * factor],
                [t[1][0] * factor, t[1][1] * factor],
            ],
            ..self.clone()
        }
    }

    fn superpose(&self, other: &Self) -> Self {
        assert!(
            std::ptr::eq(self.ensemble, other.ensemble),
            "sampled beams from different ensembles cannot interfere"
        );
        let (a, b) = (&self.jones, &other.jones);
        SampledBeam {
            jones: [
                [a[0][0] + b[0][0], a[0][1] + b[0][1]],
                [a[1][0] + b[1][0], a[1][1] + b[1][1]],
            ],
            ..self.clone()
        }
    }

    fn zeroed(&self) -> Self {
        SampledBeam {
            jones: [[ZERO; 2]; 2],
            ..self.clone()
        }
    }
}

/// Which interferometer arms are unblocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShutterState {
    pub arm_primary_open: bool,
    pub arm_auxiliary_open: bool,
}

impl ShutterState {
    pub const BOTH_OPEN: ShutterState = ShutterState {
        arm_primary_open: true,
        arm_auxiliary_open: true,
    };
    pub const PRIMARY_ONLY: ShutterState = ShutterState {
        arm_primary_open: true,
        arm_auxiliary_open: false,
    };
    pub const AUXILIARY_ONLY: ShutterState = ShutterState {
        arm_primary_open: false,
        arm_auxiliary_open: true,
    };
}

/// Multiplicative Gaussian detector noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    relative_noise: f64,
    enabled: bool,
}

impl DetectorModel {
    pub const MAX_RELATIVE_NOISE: f64 = 0.1;

    pub fn new(relative_noise: f64, enabled: bool) -> Result<Self> {
        if !(0.0..Self::MAX_RELATIVE_NOISE).contains(&relative_noise) {
            return Err(invalid(format!(
                "detector relative noise must lie in [0, {}), got {relative_noise}",
                Self::MAX_RELATIVE_NOISE
            )));
        }
        Ok(DetectorModel {
            relative_noise,
            enabled,
        })
    }

    pub fn ideal() -> Self {
        DetectorModel {
            relative_noise: 0.0,
            enabled: false,
        }
    }

    pub fn noisy(relative_noise: f64) -> Result<Self> {
        DetectorModel::new(relative_noise, true)
    }

    pub fn relative_noise(&self) -> f64 {
        self.relative_noise
    }

    pub fn is_active(&self) -> bool {
        self.enabled && self.relative_noise > 0.0
    }

    /// One detector reading of a beam of true intensity `intensity`.
    pub fn read<R: Rng + ?Sized>(&self, intensity: f64, rng: &mut R) -> f64 {
        if !self.is_active() {
            return intensity;
        }
        let z: f64 = StandardNormal.sample(rng);
        (intensity * (1.0 + self.relative_noise * z)).max(0.0)
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel::ideal()
    }
}

/// Imperfections of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Interferometer {
    pub detector: DetectorModel,
    /// Extra relative phase of the primary arm at the combiner, radians.
    pub phase_error: f64,
}

impl Interferometer {
    pub fn ideal() -> Self {
        Interferometer::default()
    }
}

/// `P₁₁, P₁₂, P₂₁, P₂₂` at one `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionQuad {
    pub p11: f64,
    pub p12: f64,
    pub p21: f64,
    pub p22: f64,
}

impl ProjectionQuad {
    pub fn get(&self, j: Component, k: Component) -> f64 {
        match (j, k) {
            (Component::First, Component::First) => self.p11,
            (Component::First, Component::Second) => self.p12,
            (Component::Second, Component::First) => self.p21,
            (Component::Second, Component::Second) => self.p22,
        }
    }

    pub fn sum(&self) -> f64 {
        self.p11 + self.p12 + self.p21 + self.p22
    }

    pub fn from_fn(mut f: impl FnMut(Component, Component) -> f64) -> Self {
        use Component::{First, Second};
        ProjectionQuad {
            p11: f(First, First),
            p12: f(First, Second),
            p21: f(Second, First),
            p22: f(Second, Second),
        }
    }
}

/// 50:50 split; the auxiliary output carries the factor `i`.
pub fn split<B: Beam>(beam: &B) -> (B, B) {
    let primary = beam.scaled(Complex64::new(FRAC_1_SQRT_2, 0.0));
    let auxiliary = beam.scaled(I * FRAC_1_SQRT_2);
    (primary, auxiliary)
}

/// Stripping polarizer angle `s` with `tan s = (κ₁/κ₂) tan b`, taken on the
/// branch `s = atan2(κ₁ sin b, κ₂ cos b)` so that it is continuous in `b`.
pub fn stripping_angle(b: Angle, schmidt: SchmidtPair) -> Result<Angle> {
    let (k1, k2) = (schmidt.kappa1(), schmidt.kappa2());
    if k2 == 0.0 && b.cos().abs() < 1e-12 {
        return Err(degenerate(format!(
            "stripping angle undefined for κ₂ = 0 at b = {}",
            b.radians()
        )));
    }
    Ok(Angle::new((k1 * b.sin()).atan2(k2 * b.cos())))
}

/// Strip `|f₂ᵇ⟩` from the auxiliary beam (given in the Schmidt frame).
pub fn strip<B: Beam>(aux: &B, b: Angle, schmidt: SchmidtPair) -> Result<B> {
    let s = stripping_angle(b, schmidt)?;
    Ok(aux.project_pol(s).settle_stripped(b))
}

/// Combine the arms on the output splitter:
/// `(aux + i·e^{iφ}·primary)/√2` with both shutters open.
pub fn recombine<B: Beam>(primary_a: &B, aux_a: &B, shutters: ShutterState, phase_error: f64) -> B {
    let primary_factor = I * Complex64::from_polar(FRAC_1_SQRT_2, phase_error);
    let aux_factor = Complex64::new(FRAC_1_SQRT_2, 0.0);
    match (shutters.arm_primary_open, shutters.arm_auxiliary_open) {
        (true, true) => aux_a.scaled(aux_factor).superpose(&primary_a.scaled(primary_factor)),
        (true, false) => primary_a.scaled(primary_factor),
        (false, true) => aux_a.scaled(aux_factor),
        (false, false) => aux_a.zeroed(),
    }
}

/// Beams reaching the detector for one joint projection.
#[derive(Debug, Clone)]
pub struct ProtocolBeams<B> {
    /// Primary arm before its analyzer.
    pub primary: B,
    /// Output with only the primary arm open.
    pub arm_only: B,
    /// Output with only the auxiliary arm open.
    pub aux_only: B,
    /// Output with both arms open.
    pub combined: B,
}

/// Run the optical train for analyzer `a` and function angle `b` (offsets for
/// `j, k` already applied).
pub fn protocol_beams<B: Beam>(
    source: &B,
    strip_kappa: SchmidtPair,
    a: Angle,
    b: Angle,
    phase_error: f64,
) -> Result<ProtocolBeams<B>> {
    let (primary, aux) = split(source);
    let primary_a = primary.project_pol(a);
    let aux_a = strip(&aux, b, strip_kappa)?.project_pol(a);
    Ok(ProtocolBeams {
        arm_only: recombine(&primary_a, &aux_a, ShutterState::PRIMARY_ONLY, phase_error),
        aux_only: recombine(&primary_a, &aux_a, ShutterState::AUXILIARY_ONLY, phase_error),
        combined: recombine(&primary_a, &aux_a, ShutterState::BOTH_OPEN, phase_error),
        primary,
    })
}

/// Intensities entering the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readings {
    /// Primary arm before its analyzer.
    pub i_total: f64,
    /// Primary arm after analyzer `a`, at the combiner input.
    pub i_arm: f64,
    /// Auxiliary arm after stripping and analyzer `a`, at the combiner input.
    pub i_aux: f64,
    /// Detector reading with both shutters open.
    pub i_out: f64,
}

impl Readings {
    /// Detector readings of the protocol beams. Single-arm readings are
    /// doubled to undo the combiner's 50% loss.
    pub fn read<B: Beam, R: Rng + ?Sized>(beams: &ProtocolBeams<B>, detector: &DetectorModel, rng: &mut R) -> Readings {
        Readings {
            i_total: detector.read(beams.primary.intensity(), rng),
            i_arm: 2.0 * detector.read(beams.arm_only.intensity(), rng),
            i_aux: 2.0 * detector.read(beams.aux_only.intensity(), rng),
            i_out: detector.read(beams.combined.intensity(), rng),
        }
    }

    /// Reconstruct the joint projection from intensities alone.
    pub fn joint_projection(&self) -> Result<f64> {
        if !(self.i_total > 0.0) {
            return Err(degenerate("primary arm carries no intensity"));
        }
        if !(self.i_aux > DEGENERATE_FRACTION * self.i_total) {
            return Err(degenerate(
                "auxiliary arm is extinguished by the stripping and analyzer polarizers",
            ));
        }
        let n = 2.0 * self.i_out - self.i_aux - self.i_arm;
        Ok(n * n / (4.0 * self.i_total * self.i_aux))
    }

    /// `∂P/∂(i_out, i_arm, i_aux, i_total)` of [`joint_projection`](Self::joint_projection).
    pub fn joint_projection_gradient(&self) -> [f64; 4] {
        let n = 2.0 * self.i_out - self.i_aux - self.i_arm;
        let d = 4.0 * self.i_total * self.i_aux;
        let p = n * n / d;
        [
            4.0 * n / d,
            -2.0 * n / d,
            -2.0 * n / d - p / self.i_aux,
            -p / self.i_total,
        ]
    }
}

/// How a `P_jk` value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Interference formula.
    Interference,
    /// `I_arm / I_total − P_jk'` from the other function component, used when
    /// the auxiliary arm of this configuration is extinguished.
    Complement,
    /// The analyzer passes no light from the primary arm, so `P_jk` is zero
    /// to within [`DEGENERATE_FRACTION`].
    Dark,
}

/// One joint-projection measurement with its raw intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMeasurement {
    pub a: Angle,
    pub b: Angle,
    pub j: Component,
    pub k: Component,
    pub readings: Readings,
    pub p: f64,
    pub via: Reconstruction,
}

/// Measure `P_jk(a, b)` through the interference formula.
///
/// `strip_kappa` sets the stripping polarizer; in a simulated experiment it is
/// the tomographic estimate rather than the generator's value.
#[allow(clippy::too_many_arguments)]
pub fn measure_joint_projection<B: Beam, R: Rng + ?Sized>(
    source: &B,
    strip_kappa: SchmidtPair,
    a: Angle,
    b: Angle,
    j: Component,
    k: Component,
    setup: &Interferometer,
    rng: &mut R,
) -> Result<JointMeasurement> {
    let beams = protocol_beams(source, strip_kappa, a + j.offset(), b + k.offset(), setup.phase_error)?;
    let readings = Readings::read(&beams, &setup.detector, rng);
    let p = readings.joint_projection()?;
    Ok(JointMeasurement {
        a,
        b,
        j,
        k,
        readings,
        p,
        via: Reconstruction::Interference,
    })
}

pub(crate) type Stage<B> = Option<(ProtocolBeams<B>, Readings)>;

/// The four stages of a quad measurement, before reconstruction.
pub(crate) struct QuadStages<B> {
    /// Indexed `[j][k]`; `None` when the stripping angle itself is undefined.
    pub(crate) stages: [[Stage<B>; 2]; 2],
}

pub(crate) fn run_quad_stages<B: Beam, R: Rng + ?Sized>(
    source: &B,
    strip_kappa: SchmidtPair,
    a: Angle,
    b: Angle,
    setup: &Interferometer,
    rng: &mut R,
) -> QuadStages<B> {
    let mut run = |j: Component, k: Component| {
        protocol_beams(source, strip_kappa, a + j.offset(), b + k.offset(), setup.phase_error)
            .ok()
            .map(|beams| {
                let readings = Readings::read(&beams, &setup.detector, rng);
                (beams, readings)
            })
    };
    let s11 = run(Component::First, Component::First);
    let s12 = run(Component::First, Component::Second);
    let s21 = run(Component::Second, Component::First);
    let s22 = run(Component::Second, Component::Second);
    QuadStages {
        stages: [[s11, s12], [s21, s22]],
    }
}

/// Resolve each `P_jk`, falling back on the complement when one function
/// component of a row is extinguished.
pub(crate) fn resolve_quad<B>(a: Angle, b: Angle, stages: &QuadStages<B>) -> Result<[[JointMeasurement; 2]; 2]> {
    let direct = |j: Component, k: Component| -> Option<(Readings, Result<f64>)> {
        stages.stages[j.index()][k.index()]
            .as_ref()
            .map(|(_, r)| (*r, r.joint_projection()))
    };
    let mut out = [[None; 2]; 2];
    for j in Component::BOTH {
        for k in Component::BOTH {
            let other = match k {
                Component::First => Component::Second,
                Component::Second => Component::First,
            };
            let measurement = match direct(j, k) {
                Some((readings, Ok(p))) => JointMeasurement {
                    a,
                    b,
                    j,
                    k,
                    readings,
                    p,
                    via: Reconstruction::Interference,
                },
                mine => match direct(j, other) {
                    Some((r_other, Ok(p_other))) => JointMeasurement {
                        a,
                        b,
                        j,
                        k,
                        // Keep this configuration's own readings when it has them.
                        readings: mine.map(|(r, _)| r).unwrap_or(r_other),
                        p: r_other.i_arm / r_other.i_total - p_other,
                        via: Reconstruction::Complement,
                    },
                    _ if row_is_dark(stages, j) => JointMeasurement {
                        a,
                        b,
                        j,
                        k,
                        readings: mine
                            .or(direct(j, other))
                            .map(|(r, _)| r)
                            .expect("dark row has readings"),
                        p: 0.0,
                        via: Reconstruction::Dark,
                    },
                    _ => {
                        return Err(degenerate(format!(
                            "no auxiliary light reaches the detector for j = {} at a = {}, b = {}",
                            j.label(),
                            a.radians(),
                            b.radians()
                        )))
                    }
                },
            };
            out[j.index()][k.index()] = Some(measurement);
        }
    }
    Ok(out.map(|row| row.map(|m| m.expect("every entry resolved"))))
}

fn row_is_dark<B>(stages: &QuadStages<B>, j: Component) -> bool {
    stages.stages[j.index()]
        .iter()
        .flatten()
        .any(|(_, r)| r.i_total > 0.0 && r.i_arm <= DEGENERATE_FRACTION * r.i_total)
}

/// All four joint projections at `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadMeasurement {
    pub quad: ProjectionQuad,
    /// Indexed `[j][k]`.
    pub records: [[JointMeasurement; 2]; 2],
}

/// Measure `P_jk(a, b)` for all `j, k`.
pub fn measure_quad<B: Beam, R: Rng + ?Sized>(
    source: &B,
    strip_kappa: SchmidtPair,
    a: Angle,
    b: Angle,
    setup: &Interferometer,
    rng: &mut R,
) -> Result<QuadMeasurement> {
    let stages = run_quad_stages(source, strip_kappa, a, b, setup, rng);
    let records = resolve_quad(a, b, &stages)?;
    let quad = ProjectionQuad::from_fn(|j, k| records[j.index()][k.index()].p);
    Ok(QuadMeasurement { quad, records })
}

/// `∂C/∂(i_out, i_arm, i_aux, i_total)` for the readings of each stage,
/// indexed `[j][k]`, with `C = P₁₁ − P₁₂ − P₂₁ + P₂₂`.
pub(crate) fn correlation_gradients<B>(
    stages: &QuadStages<B>,
    records: &[[JointMeasurement; 2]; 2],
) -> [[[f64; 4]; 2]; 2] {
    let mut grads = [[[0.0; 4]; 2]; 2];
    for m in records.iter().flatten() {
        let sign = if m.j == m.k { 1.0 } else { -1.0 };
        let (k, g) = match m.via {
            Reconstruction::Dark => continue,
            Reconstruction::Interference => {
                let (_, r) = stages.stages[m.j.index()][m.k.index()]
                    .as_ref()
                    .expect("measured stage");
                (m.k, r.joint_projection_gradient())
            }
            Reconstruction::Complement => {
                let other = match m.k {
                    Component::First => Component::Second,
                    Component::Second => Component::First,
                };
                let (_, r) = stages.stages[m.j.index()][other.index()]
                    .as_ref()
                    .expect("measured stage");
                let g = r.joint_projection_gradient();
                // P = I_arm/I_total − P_other
                (
                    other,
                    [
                        -g[0],
                        1.0 / r.i_total - g[1],
                        -g[2],
                        -r.i_arm / (r.i_total * r.i_total) - g[3],
                    ],
                )
            }
        };
        for (acc, x) in grads[m.j.index()][k.index()].iter_mut().zip(g) {
            *acc += sign * x;
        }
    }
    grads
}

/// Standard deviation of `C` caused by independent multiplicative noise on
/// every detector reading.
pub(crate) fn detector_stderr<B>(stages: &QuadStages<B>, grads: &[[[f64; 4]; 2]; 2], detector: &DetectorModel) -> f64 {
    if !detector.is_active() {
        return 0.0;
    }
    let mut var = 0.0;
    for (row_s, row_g) in stages.stages.iter().zip(grads) {
        for (stage, g) in row_s.iter().zip(row_g) {
            if let Some((_, r)) = stage {
                let readings = [r.i_out, r.i_arm, r.i_aux, r.i_total];
                for (gx, ix) in g.iter().zip(readings) {
                    let d = gx * detector.relative_noise() * ix;
                    var += d * d;
                }
            }
        }
    }
    var.sqrt()
}

/// Hermitian form `Q` whose per-sample values `E† Q E` are the first-order
/// influence of each field sample on `C`.
pub(crate) fn influence_form(stages: &QuadStages<SampledBeam<'_>>, grads: &[[[f64; 4]; 2]; 2]) -> Mat2 {
    let mut forms = Vec::new();
    let mut weights = Vec::new();
    for (row_s, row_g) in stages.stages.iter().zip(grads) {
        for (stage, g) in row_s.iter().zip(row_g) {
            if let Some((beams, _)) = stage {
                forms.extend([
                    beams.combined.intensity_form(),
                    scale_form(&beams.arm_only.intensity_form(), 2.0),
                    scale_form(&beams.aux_only.intensity_form(), 2.0),
                    beams.primary.intensity_form(),
                ]);
                weights.extend_from_slice(g);
            }
        }
    }
    combine_forms(&forms, &weights)
}

fn scale_form(h: &Mat2, s: f64) -> Mat2 {
    h.map(|row| row.map(|z| z * s))
}

fn combine_forms(forms: &[Mat2], weights: &[f64]) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (h, w) in forms.iter().zip(weights) {
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += h[i][j] * *w;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{generate, EnsembleParams};
    use crate::field::{frobenius_sqr, joint_projection};
    use crate::polarimetry::schmidt_from_dop;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn eighth_dop_kappa() -> SchmidtPair {
        schmidt_from_dop(0.125).unwrap()
    }

    #[test]
    fn split_examples() {
        let beam = BeamState::schmidt(eighth_dop_kappa(), 2.0).unwrap();
        let (p, a) = split(&beam);
        assert!((p.intensity() - 1.0).abs() < 1e-15);
        assert!((a.intensity() - 1.0).abs() < 1e-15);
        assert_eq!(p.coeffs(), beam.coeffs());
        assert_eq!(a.coeffs(), beam.coeffs());
        assert!((a.global_phase() - I).norm() < 1e-15);

        let zero = beam.zeroed();
        let (p, a) = split(&zero);
        assert_eq!(p.intensity(), 0.0);
        assert_eq!(a.intensity(), 0.0);
    }

    #[test]
    fn stripping_angle_examples() {
        let b0 = stripping_angle(Angle::ZERO, eighth_dop_kappa()).unwrap();
        assert_eq!(b0.radians(), 0.0);
        for b in [-2.0, 0.3, 1.1, 2.9] {
            let s = stripping_angle(Angle::new(b), SchmidtPair::unpolarized()).unwrap();
            assert!(s.approx_eq(Angle::new(b), 1e-12));
        }
        let k = eighth_dop_kappa();
        let s = stripping_angle(Angle::new(FRAC_PI_4), k).unwrap();
        assert!((s.radians() - (k.kappa1() / k.kappa2()).atan()).abs() < 1e-12);
        assert!((s.radians() - 0.8477).abs() < 5e-4);

        assert!(matches!(
            stripping_angle(Angle::new(FRAC_PI_2), SchmidtPair::polarized()),
            Err(crate::Error::Degenerate(_))
        ));
    }

    #[test]
    fn stripping_angle_satisfies_tangent_condition() {
        let k = SchmidtPair::from_kappa1(0.83).unwrap();
        for i in 0..40 {
            let b = -3.0 + 0.15 * i as f64;
            if b.cos().abs() < 1e-3 {
                continue;
            }
            let s = stripping_angle(Angle::new(b), k).unwrap().radians();
            assert!((s.tan() - k.kappa1() / k.kappa2() * b.tan()).abs() < 1e-9 * (1.0 + s.tan().abs()));
        }
    }

    #[test]
    fn strip_examples() {
        // Unpolarized, b = 0: output ∝ |u₁⟩|f₁⟩ with half the intensity.
        let aux = BeamState::schmidt(SchmidtPair::unpolarized(), 1.0).unwrap();
        let out = strip(&aux, Angle::ZERO, SchmidtPair::unpolarized()).unwrap();
        assert!((out.intensity() - 0.5).abs() < 1e-15);
        let m = out.coeffs();
        assert!(m[1][0].norm() < 1e-15 && m[0][1] == ZERO && m[1][1] == ZERO);

        let pol = BeamState::schmidt(SchmidtPair::polarized(), 3.0).unwrap();
        let out = strip(&pol, Angle::ZERO, SchmidtPair::polarized()).unwrap();
        assert!((out.intensity() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn strip_intensity_and_completeness() {
        for kappa1 in [0.71, 0.75, 0.9, 0.99] {
            let k = SchmidtPair::from_kappa1(kappa1).unwrap();
            for i in 0..24 {
                let b = Angle::new(-3.0 + 0.26 * i as f64);
                let aux = BeamState::schmidt(k, 1.7).unwrap();
                let out = strip(&aux, b, k).unwrap();
                let s = stripping_angle(b, k).unwrap();
                let amp = k.kappa1() * b.cos() * s.cos() + k.kappa2() * b.sin() * s.sin();
                assert!((out.intensity() - 1.7 * amp * amp).abs() < 1e-12);
                assert_eq!(out.fun_frame(), b);
                assert_eq!(out.coeffs()[0][1], ZERO);
                assert_eq!(out.coeffs()[1][1], ZERO);
            }
        }
    }

    #[test]
    fn strip_with_wrong_kappa_leaves_f2() {
        let aux = BeamState::schmidt(eighth_dop_kappa(), 1.0).unwrap();
        let out = strip(&aux, Angle::new(0.7), SchmidtPair::unpolarized()).unwrap();
        assert!(out.coeffs()[0][1].norm() > 1e-3 || out.coeffs()[1][1].norm() > 1e-3);
    }

    #[test]
    fn recombine_examples() {
        let x = BeamState::schmidt(eighth_dop_kappa(), 1.0).unwrap();
        let aux = x.scaled(I);
        let both = recombine(&x, &aux, ShutterState::BOTH_OPEN, 0.0);
        assert!((both.intensity() - 2.0).abs() < 1e-12);

        let anti = x.scaled(-I);
        let none = recombine(&x, &anti, ShutterState::BOTH_OPEN, 0.0);
        assert!(none.intensity() < 1e-30);

        let one = recombine(&x, &aux, ShutterState::PRIMARY_ONLY, 0.0);
        assert!((one.intensity() - 0.5).abs() < 1e-15);
        let other = recombine(&x, &aux, ShutterState::AUXILIARY_ONLY, 0.0);
        assert!((other.intensity() - 0.5).abs() < 1e-15);
        let closed = recombine(
            &x,
            &aux,
            ShutterState {
                arm_primary_open: false,
                arm_auxiliary_open: false,
            },
            0.0,
        );
        assert_eq!(closed.intensity(), 0.0);
    }

    #[test]
    fn joint_projection_unpolarized_origin() {
        let src = BeamState::schmidt(SchmidtPair::unpolarized(), 1.0).unwrap();
        let m = measure_joint_projection(
            &src,
            SchmidtPair::unpolarized(),
            Angle::ZERO,
            Angle::ZERO,
            Component::First,
            Component::First,
            &Interferometer::ideal(),
            &mut rng(),
        )
        .unwrap();
        assert!((m.p - 0.5).abs() < 1e-12);
        assert!((m.readings.i_total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn joint_projection_matches_direct_projection() {
        let mut r = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let k = SchmidtPair::from_kappa1(r.random_range(0.7072..0.999)).unwrap();
            let a = Angle::new(r.random_range(-3.0..3.0));
            let b = Angle::new(r.random_range(-3.0..3.0));
            let src = BeamState::schmidt(k, r.random_range(0.1..5.0)).unwrap();
            let m = measure_joint_projection(
                &src,
                k,
                a,
                b,
                Component::First,
                Component::First,
                &Interferometer::ideal(),
                &mut r,
            );
            let direct = joint_projection(&src, a, b, Component::First, Component::First);
            match m {
                Ok(m) => assert!((m.p - direct).abs() < 1e-12, "{} vs {direct}", m.p),
                Err(e) => panic!("unexpected degeneracy {e}"),
            }
        }
    }

    #[test]
    fn polarized_beam_rows() {
        // The separable beam passes a = 0 entirely: P₁₁ + P₁₂ = 1.
        let src = BeamState::schmidt(SchmidtPair::polarized(), 1.0).unwrap();
        let q = measure_quad(
            &src,
            SchmidtPair::polarized(),
            Angle::ZERO,
            Angle::ZERO,
            &Interferometer::ideal(),
            &mut rng(),
        )
        .unwrap();
        assert!((q.quad.p11 + q.quad.p12 - 1.0).abs() < 1e-12);
        assert_eq!(q.records[1][0].via, Reconstruction::Dark);
        assert_eq!(q.quad.p21 + q.quad.p22, 0.0);
        for b in [0.3, 1.0, 2.2] {
            let direct: f64 = Component::BOTH
                .iter()
                .map(|&k| joint_projection(&src, Angle::ZERO, Angle::new(b), Component::First, k))
                .sum();
            assert!((direct - 1.0).abs() < 1e-12);
            // Away from b = 0 the stripping polarizer blocks the auxiliary arm.
            let err = measure_quad(
                &src,
                SchmidtPair::polarized(),
                Angle::ZERO,
                Angle::new(b),
                &Interferometer::ideal(),
                &mut rng(),
            );
            assert!(matches!(err, Err(crate::Error::Degenerate(_))));
        }
    }

    #[test]
    fn quad_examples() {
        let unpol = BeamState::schmidt(SchmidtPair::unpolarized(), 1.0).unwrap();
        let q = measure_quad(
            &unpol,
            SchmidtPair::unpolarized(),
            Angle::new(1.0 + FRAC_PI_4),
            Angle::new(1.0),
            &Interferometer::ideal(),
            &mut rng(),
        )
        .unwrap();
        for p in [q.quad.p11, q.quad.p12, q.quad.p21, q.quad.p22] {
            assert!((p - 0.25).abs() < 1e-12);
        }

        let k = eighth_dop_kappa();
        let src = BeamState::schmidt(k, 1.0).unwrap();
        let q = measure_quad(&src, k, Angle::ZERO, Angle::ZERO, &Interferometer::ideal(), &mut rng()).unwrap();
        assert!((q.quad.p11 - 0.5625).abs() < 1e-12);
        assert!((q.quad.p22 - 0.4375).abs() < 1e-12);
        assert!(q.quad.p12.abs() < 1e-12 && q.quad.p21.abs() < 1e-12);
    }

    #[test]
    fn quad_complement_at_crossed_polarizers() {
        // a − b = π/2 on the unpolarized beam extinguishes the (2,1) auxiliary arm.
        let unpol = BeamState::schmidt(SchmidtPair::unpolarized(), 1.0).unwrap();
        let q = measure_quad(
            &unpol,
            SchmidtPair::unpolarized(),
            Angle::new(0.4),
            Angle::new(0.4),
            &Interferometer::ideal(),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(q.records[1][0].via, Reconstruction::Complement);
        assert!(q.quad.p21.abs() < 1e-12);
        assert!((q.quad.sum() - 1.0).abs() < 1e-12);
        assert!((q.quad.p11 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shutter_energy_accounting() {
        let k = eighth_dop_kappa();
        let src = BeamState::schmidt(k, 2.0).unwrap();
        let beams = protocol_beams(&src, k, Angle::new(0.3), Angle::new(-0.2), 0.0).unwrap();
        let primary_a = beams.primary.project_pol(Angle::new(0.3));
        assert!((beams.arm_only.intensity() - 0.5 * primary_a.intensity()).abs() < 1e-15);
    }

    #[test]
    fn eq9_is_scale_invariant() {
        let k = SchmidtPair::from_kappa1(0.8).unwrap();
        let (a, b) = (Angle::new(0.2), Angle::new(0.9));
        let run = |i: f64| {
            let src = BeamState::schmidt(k, i).unwrap();
            measure_joint_projection(
                &src,
                k,
                a,
                b,
                Component::First,
                Component::First,
                &Interferometer::ideal(),
                &mut rng(),
            )
            .unwrap()
            .p
        };
        let base = run(1.0);
        for scale in [1e-3, 0.5, 7.0, 1e4] {
            assert!((run(scale) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn detector_noise_model() {
        assert!(DetectorModel::new(0.2, true).is_err());
        assert!(DetectorModel::new(-0.01, true).is_err());
        let d = DetectorModel::noisy(0.01).unwrap();
        let mut r = rng();
        let xs: Vec<f64> = (0..20_000).map(|_| d.read(2.0, &mut r)).collect();
        let est = Estimate::from_samples(xs.iter().copied());
        assert!(est.within(2.0, 3.0));
        let sd = est.stderr * (xs.len() as f64).sqrt();
        assert!((sd - 0.02).abs() < 0.001);
        assert_eq!(DetectorModel::ideal().read(2.0, &mut r), 2.0);
    }

    #[test]
    fn phase_error_scales_projection() {
        let src = BeamState::schmidt(SchmidtPair::unpolarized(), 1.0).unwrap();
        let setup = Interferometer {
            detector: DetectorModel::ideal(),
            phase_error: 0.1,
        };
        let m = measure_joint_projection(
            &src,
            SchmidtPair::unpolarized(),
            Angle::ZERO,
            Angle::new(FRAC_PI_6),
            Component::First,
            Component::First,
            &setup,
            &mut rng(),
        )
        .unwrap();
        let ideal = joint_projection(
            &src,
            Angle::ZERO,
            Angle::new(FRAC_PI_6),
            Component::First,
            Component::First,
        );
        assert!((m.p - ideal * 0.1f64.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sampled_beam_tracks_symbolic_algebra() {
        let k = eighth_dop_kappa();
        let e = generate(k, 1.0, EnsembleParams::new(2_000, 8, 4).unwrap()).unwrap();
        let sampled = SampledBeam::source(&e);
        let (a, b) = (Angle::new(0.4), Angle::new(-0.3));
        let beams = protocol_beams(&sampled, k, a, b, 0.0).unwrap();
        // Empirical intensity equals tr(T J T†) with the empirical coherence matrix.
        let j = e.coherence();
        let t = beams.combined.jones();
        let mut tr = 0.0;
        for row in t {
            for p in 0..2 {
                for q in 0..2 {
                    tr += (row[p] * j[p][q] * row[q].conj()).re;
                }
            }
        }
        assert!((beams.combined.intensity() - tr).abs() < 1e-12);
    }

    #[test]
    fn sampled_strip_removes_f2() {
        let k = eighth_dop_kappa();
        let e = generate(k, 1.0, EnsembleParams::new(4_000, 16, 12).unwrap()).unwrap();
        let aux = SampledBeam::source(&e);
        for b in [0.3, 1.2, -0.8] {
            let b = Angle::new(b);
            let out = strip(&aux, b, k).unwrap();
            let f2b = FunBasisLabel::new(Component::Second, b);
            for (re, im) in out.fun_overlap(f2b) {
                assert!(re.within(0.0, 3.0) && im.within(0.0, 3.0), "{re:?} {im:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn strip_then_analyze_stays_in_f1b(kappa1 in 0.7072..1.0f64, b in -3.0..3.0f64, a in -3.0..3.0f64) {
            let k = SchmidtPair::from_kappa1(kappa1).unwrap();
            prop_assume!(k.kappa2() > 1e-6);
            let aux = BeamState::schmidt(k, 1.0).unwrap();
            let out = strip(&aux, Angle::new(b), k).unwrap().project_pol(Angle::new(a));
            prop_assert!(out.coeffs()[0][1] == ZERO && out.coeffs()[1][1] == ZERO);
            prop_assert!(frobenius_sqr(out.coeffs()) <= 1.0 + 1e-12);
        }
    }
}
