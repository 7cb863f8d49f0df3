//! Seeded Monte Carlo realizations of the stochastic field.
//!
//! Each realization draws the two unit amplitude processes `f₁(t)`, `f₂(t)` as
//! independent circular complex Gaussian white noise with `⟨|f|²⟩ = 1`. The
//! field in the Schmidt frame is `E = √I (κ₁ f₁, κ₂ f₂)`. Only second-order
//! statistics are ever consumed downstream, so the amplitude law is a modeling
//! choice and not a constraint.
//!
//! Realization `r` draws from a ChaCha8 generator keyed by the master seed and
//! positioned on stream `r`. Streams are independent counters, so the ensemble
//! is bit-identical no matter how realizations are scheduled across threads.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::field::{FunBasisLabel, Mat2, SchmidtPair, ZERO};

/// Sample sizes and master seed of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleParams {
    n_realizations: usize,
    samples_per_realization: usize,
    seed: u64,
}

impl EnsembleParams {
    pub const DEFAULT_REALIZATIONS: usize = 10_000;
    pub const DEFAULT_SAMPLES: usize = 16;

    pub fn new(n_realizations: usize, samples_per_realization: usize, seed: u64) -> Result<Self> {
        if n_realizations == 0 {
            return Err(invalid("n_realizations must be at least 1"));
        }
        if samples_per_realization == 0 {
            return Err(invalid("samples_per_realization must be at least 1"));
        }
        Ok(EnsembleParams {
            n_realizations,
            samples_per_realization,
            seed,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EnsembleParams { seed, ..self }
    }

    pub fn n_realizations(&self) -> usize {
        self.n_realizations
    }

    pub fn samples_per_realization(&self) -> usize {
        self.samples_per_realization
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_samples(&self) -> usize {
        self.n_realizations * self.samples_per_realization
    }
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            n_realizations: Self::DEFAULT_REALIZATIONS,
            samples_per_realization: Self::DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// Polarization axis of the Schmidt frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Mean and standard error of the mean of `values`.
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in values {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        if n < 2 {
            return Estimate {
                value: mean,
                stderr: 0.0,
            };
        }
        let var = m2 / (n - 1) as f64;
        Estimate {
            value: mean,
            stderr: (var / n as f64).sqrt(),
        }
    }

    /// `|value − expected| ≤ n_sigma · stderr`.
    pub fn within(&self, expected: f64, n_sigma: f64) -> bool {
        (self.value - expected).abs() <= n_sigma * self.stderr
    }
}

/// Seeded collection of field samples `(E_x(t), E_y(t))` in the Schmidt frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    params: EnsembleParams,
    schmidt: SchmidtPair,
    intensity: f64,
    /// Unit processes `(f₁, f₂)`, realization-major.
    processes: Vec<[Complex64; 2]>,
}

/// Draw an ensemble. Deterministic in `params.seed`.
pub fn generate(schmidt: SchmidtPair, intensity: f64, params: EnsembleParams) -> Result<FieldEnsemble> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(invalid(format!("intensity must be positive, got {intensity}")));
    }
    let per = params.samples_per_realization;
    let mut processes = vec![[ZERO; 2]; params.total_samples()];
    processes
        .par_chunks_mut(per)
        .enumerate()
        .for_each(|(r, chunk)| fill_realization(params.seed, r as u64, chunk));
    Ok(FieldEnsemble {
        params,
        schmidt,
        intensity,
        processes,
    })
}

fn fill_realization(seed: u64, stream: u64, out: &mut [[Complex64; 2]]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for slot in out.iter_mut() {
        for f in slot.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *f = Complex64::new(re * scale, im * scale);
        }
    }
}

impl FieldEnsemble {
    pub fn params(&self) -> &EnsembleParams {
        &self.params
    }

    pub fn schmidt(&self) -> SchmidtPair {
        self.schmidt
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    /// Unit amplitude processes `(f₁(t), f₂(t))`, realization-major.
    pub fn processes(&self) -> &[[Complex64; 2]] {
        &self.processes
    }

    fn field_weights(&self) -> [f64; 2] {
        let amp = self.intensity.sqrt();
        [amp * self.schmidt.kappa1(), amp * self.schmidt.kappa2()]
    }

    /// Field samples `(E_x, E_y)` in the Schmidt frame.
    pub fn fields(&self) -> impl ExactSizeIterator<Item = [Complex64; 2]> + '_ {
        let w = self.field_weights();
        self.processes.iter().map(move |f| [f[0] * w[0], f[1] * w[1]])
    }

    /// Field samples of realization `r`.
    pub fn realization(&self, r: usize) -> impl ExactSizeIterator<Item = [Complex64; 2]> + '_ {
        let per = self.params.samples_per_realization;
        let w = self.field_weights();
        self.processes[r * per..(r + 1) * per]
            .iter()
            .map(move |f| [f[0] * w[0], f[1] * w[1]])
    }

    /// Mean of a real per-sample statistic of the field, with its standard error.
    pub fn estimate(&self, f: impl Fn(&[Complex64; 2]) -> f64) -> Estimate {
        Estimate::from_samples(self.fields().map(|e| f(&e)))
    }

    /// `⟨E_i E_j*⟩` over every sample of every realization.
    pub fn empirical_correlator(&self, i: Axis, j: Axis) -> Complex64 {
        let (i, j) = (i.index(), j.index());
        let sum: Complex64 = self.fields().map(|e| e[i] * e[j].conj()).sum();
        sum / self.len() as f64
    }

    /// Real and imaginary parts of `⟨E_i E_j*⟩` as separate estimates.
    pub fn correlator_estimate(&self, i: Axis, j: Axis) -> (Estimate, Estimate) {
        let (i, j) = (i.index(), j.index());
        let re = self.estimate(|e| (e[i] * e[j].conj()).re);
        let im = self.estimate(|e| (e[i] * e[j].conj()).im);
        (re, im)
    }

    /// The empirical 2x2 coherence matrix `J_ij = ⟨E_i E_j*⟩`.
    pub fn coherence(&self) -> Mat2 {
        let mut acc = [[ZERO; 2]; 2];
        for e in self.fields() {
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += e[i] * e[j].conj();
                }
            }
        }
        let n = self.len() as f64;
        for z in acc.iter_mut().flatten() {
            *z /= n;
        }
        acc
    }

    /// Samples of the (possibly rotated) basis process named by `label`.
    pub fn fun_process(&self, label: FunBasisLabel) -> impl ExactSizeIterator<Item = Complex64> + '_ {
        let w = label.weights();
        self.processes.iter().map(move |f| f[0] * w[0] + f[1] * w[1])
    }

    /// Sample inner product `⟨g₁|g₂⟩ = mean(conj(g₁) g₂)` of two basis processes.
    pub fn empirical_fun_inner(&self, label1: FunBasisLabel, label2: FunBasisLabel) -> Complex64 {
        let sum: Complex64 = self
            .fun_process(label1)
            .zip(self.fun_process(label2))
            .map(|(g, h)| g.conj() * h)
            .sum();
        sum / self.len() as f64
    }

    /// Estimates of `Re` and `Im` of [`empirical_fun_inner`](Self::empirical_fun_inner).
    pub fn fun_inner_estimate(&self, label1: FunBasisLabel, label2: FunBasisLabel) -> (Estimate, Estimate) {
        let products: Vec<Complex64> = self
            .fun_process(label1)
            .zip(self.fun_process(label2))
            .map(|(g, h)| g.conj() * h)
            .collect();
        (
            Estimate::from_samples(products.iter().map(|z| z.re)),
            Estimate::from_samples(products.iter().map(|z| z.im)),
        )
    }

    /// Mean of the quadratic form `E† H E` over all samples.
    pub fn mean_quadratic(&self, h: &Mat2) -> f64 {
        let sum: f64 = self.fields().map(|e| quadratic(h, &e)).sum();
        sum / self.len() as f64
    }

    /// [`mean_quadratic`](Self::mean_quadratic) with its standard error.
    pub fn quadratic_estimate(&self, h: &Mat2) -> Estimate {
        self.estimate(|e| quadratic(h, e))
    }

    /// Text dump, one sample per line: `re_Ex,im_Ex,re_Ey,im_Ey`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re_Ex,im_Ex,re_Ey,im_Ey")?;
        for e in self.fields() {
            writeln!(out, "{},{},{},{}", e[0].re, e[0].im, e[1].re, e[1].im)?;
        }
        Ok(())
    }
}

/// `Re(E† H E)`; exact for Hermitian `H`.
pub(crate) fn quadratic(h: &Mat2, e: &[Complex64; 2]) -> f64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += e[i].conj() * h[i][j] * e[j];
        }
    }
    acc.re
}

/// Read back a dump written by [`FieldEnsemble::write_dump`].
pub fn read_dump<R: BufRead>(input: R) -> Result<Vec<[Complex64; 2]>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| invalid(format!("dump read failed: {e}")))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("re_Ex")) {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| invalid(format!("dump line {}: {e}", lineno + 1)))?;
        if cols.len() != 4 {
            return Err(invalid(format!(
                "dump line {}: expected 4 columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        out.push([Complex64::new(cols[0], cols[1]), Complex64::new(cols[2], cols[3])]);
    }
    Ok(out)
}
