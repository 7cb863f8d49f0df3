//! Correlation providers `C(a, b)`.
//!
//! Every route to a correlation implements [`CorrelationProvider`], so the
//! Bell machinery is shared by the closed form, the exact protocol algebra,
//! and the sampled-field simulations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{Estimate, FieldEnsemble};
use crate::error::Result;
use crate::field::{self, Angle, BeamState, Component, FunBasisLabel, SchmidtPair};
use crate::interferometer::{
    correlation_gradients, detector_stderr, influence_form, resolve_quad, run_quad_stages, Interferometer,
    ProjectionQuad, SampledBeam,
};

/// Source of correlation values with standard errors (zero when exact).
pub trait CorrelationProvider: Sync {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate>;
}

impl<F> CorrelationProvider for F
where
    F: Fn(Angle, Angle) -> f64 + Sync,
{
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        Ok(Estimate::exact(self(a, b)))
    }
}

/// `P₁₁ − P₁₂ − P₂₁ + P₂₂`.
pub fn correlation_from_quad(q: &ProjectionQuad) -> f64 {
    q.p11 - q.p12 - q.p21 + q.p22
}

/// `cos 2a cos 2b + 2κ₁κ₂ sin 2a sin 2b`.
pub fn correlation_analytic(a: Angle, b: Angle, schmidt: SchmidtPair) -> f64 {
    let (a2, b2) = (2.0 * a.radians(), 2.0 * b.radians());
    a2.cos() * b2.cos() + 2.0 * schmidt.product() * a2.sin() * b2.sin()
}

/// Closed-form correlation.
#[derive(Debug, Clone, Copy)]
pub struct Analytic {
    pub schmidt: SchmidtPair,
}

impl CorrelationProvider for Analytic {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        Ok(Estimate::exact(correlation_analytic(a, b, self.schmidt)))
    }
}

/// Direct joint projections of an exact beam state.
#[derive(Debug, Clone)]
pub struct DirectProjection {
    pub beam: BeamState,
}

impl CorrelationProvider for DirectProjection {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        let q = ProjectionQuad::from_fn(|j, k| field::joint_projection(&self.beam, a, b, j, k));
        Ok(Estimate::exact(correlation_from_quad(&q)))
    }
}

/// Derive the detector-noise generator for one `(a, b)` evaluation, so that
/// results do not depend on evaluation order.
pub fn measurement_rng(seed: u64, a: Angle, b: Angle) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(mix(a.radians().to_bits()) ^ b.radians().to_bits().rotate_left(17)));
    rng
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The interferometric protocol applied to an exact beam state.
#[derive(Debug, Clone)]
pub struct SymbolicProtocol {
    pub source: BeamState,
    /// Schmidt coefficients used to set the stripping polarizer.
    pub strip_kappa: SchmidtPair,
    pub setup: Interferometer,
    pub noise_seed: u64,
}

impl SymbolicProtocol {
    pub fn ideal(schmidt: SchmidtPair, intensity: f64) -> Result<Self> {
        Ok(SymbolicProtocol {
            source: BeamState::schmidt(schmidt, intensity)?,
            strip_kappa: schmidt,
            setup: Interferometer::ideal(),
            noise_seed: 0,
        })
    }

    pub fn quad(&self, a: Angle, b: Angle) -> Result<ProjectionQuad> {
        let mut rng = measurement_rng(self.noise_seed, a, b);
        let stages = run_quad_stages(&self.source, self.strip_kappa, a, b, &self.setup, &mut rng);
        let records = resolve_quad(a, b, &stages)?;
        Ok(ProjectionQuad::from_fn(|j, k| records[j.index()][k.index()].p))
    }
}

/// The standard error is the detector-noise contribution, propagated to first
/// order through the reconstruction; zero for an ideal detector.
impl CorrelationProvider for SymbolicProtocol {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        let mut rng = measurement_rng(self.noise_seed, a, b);
        let stages = run_quad_stages(&self.source, self.strip_kappa, a, b, &self.setup, &mut rng);
        let records = resolve_quad(a, b, &stages)?;
        let q = ProjectionQuad::from_fn(|j, k| records[j.index()][k.index()].p);
        let grads = correlation_gradients(&stages, &records);
        Ok(Estimate {
            value: correlation_from_quad(&q),
            stderr: detector_stderr(&stages, &grads, &self.setup.detector),
        })
    }
}

/// The interferometric protocol applied to a sampled field ensemble.
///
/// The standard error combines the sampling error of the intensity averages
/// with detector noise, both propagated to first order through the
/// reconstruction. The stripping polarizer is treated as a fixed setting.
#[derive(Debug, Clone)]
pub struct EnsembleProtocol<'a> {
    pub ensemble: &'a FieldEnsemble,
    pub strip_kappa: SchmidtPair,
    pub setup: Interferometer,
    pub noise_seed: u64,
}

impl<'a> EnsembleProtocol<'a> {
    pub fn new(ensemble: &'a FieldEnsemble, strip_kappa: SchmidtPair, setup: Interferometer, noise_seed: u64) -> Self {
        EnsembleProtocol {
            ensemble,
            strip_kappa,
            setup,
            noise_seed,
        }
    }
}

impl CorrelationProvider for EnsembleProtocol<'_> {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        let source = SampledBeam::source(self.ensemble);
        let mut rng = measurement_rng(self.noise_seed, a, b);
        let stages = run_quad_stages(&source, self.strip_kappa, a, b, &self.setup, &mut rng);
        let records = resolve_quad(a, b, &stages)?;
        let q = ProjectionQuad::from_fn(|j, k| records[j.index()][k.index()].p);
        let grads = correlation_gradients(&stages, &records);
        let sampling = self
            .ensemble
            .quadratic_estimate(&influence_form(&stages, &grads))
            .stderr;
        let detector = detector_stderr(&stages, &grads, &self.setup.detector);
        Ok(Estimate {
            value: correlation_from_quad(&q),
            stderr: sampling.hypot(detector),
        })
    }
}

/// Joint projections evaluated directly on the sampled field: the amplitude
/// on `|u_jᵃ⟩|f_kᵇ⟩` is the sample mean of `f_kᵇ(t)* · u_jᵃ·E(t)`.
///
/// Unlike the interferometer this needs no stripping polarizer, so it stays
/// defined for fully polarized fields.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleProjection<'a> {
    pub ensemble: &'a FieldEnsemble,
}

impl CorrelationProvider for EnsembleProjection<'_> {
    fn correlation(&self, a: Angle, b: Angle) -> Result<Estimate> {
        let e = self.ensemble;
        let n = e.len() as f64;
        let sign = |j: Component, k: Component| if j == k { 1.0 } else { -1.0 };
        let u = |j: Component| field::rotation(a + j.offset())[0];
        let labels = Component::BOTH.map(|k| FunBasisLabel::new(Component::First, b + k.offset()));

        let per_sample = |f: &[Complex64; 2], field: &[Complex64; 2]| {
            let g = labels.map(|l| {
                let w = l.weights();
                f[0] * w[0] + f[1] * w[1]
            });
            let mut z = [[Complex64::new(0.0, 0.0); 2]; 2];
            for j in Component::BOTH {
                let uj = u(j);
                let along = field[0] * uj[0] + field[1] * uj[1];
                for k in Component::BOTH {
                    z[j.index()][k.index()] = g[k.index()].conj() * along;
                }
            }
            z
        };

        let mut amp = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut power = 0.0;
        for (f, field) in e.processes().iter().zip(e.fields()) {
            let z = per_sample(f, &field);
            for j in 0..2 {
                for k in 0..2 {
                    amp[j][k] += z[j][k];
                }
            }
            power += field[0].norm_sqr() + field[1].norm_sqr();
        }
        for z in amp.iter_mut().flatten() {
            *z /= n;
        }
        power /= n;

        let mut numerator = 0.0;
        for j in Component::BOTH {
            for k in Component::BOTH {
                numerator += sign(j, k) * amp[j.index()][k.index()].norm_sqr();
            }
        }
        let value = numerator / power;

        let influence = e.processes().iter().zip(e.fields()).map(|(f, field)| {
            let z = per_sample(f, &field);
            let mut psi = 0.0;
            for j in Component::BOTH {
                for k in Component::BOTH {
                    let (ji, ki) = (j.index(), k.index());
                    psi += sign(j, k) * 2.0 * (amp[ji][ki].conj() * z[ji][ki]).re;
                }
            }
            (psi - value * (field[0].norm_sqr() + field[1].norm_sqr())) / power
        });
        let stderr = Estimate::from_samples(influence).stderr;
        Ok(Estimate { value, stderr })
    }
}
