//! CHSH analysis: the Bell parameter, its closed forms, and optimization.
//!
//! The Bell parameter is
//!
//! ```text
//! ℬ = |C(a,b) − C(a′,b) + C(a,b′) + C(a′,b′)|
//! ```
//!
//! and for a field with Schmidt coefficients `κ₁, κ₂` its maximum over all
//! analyzer settings is `2√(1 + 4κ₁²κ₂²)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use rayon::prelude::*;

use crate::correlation::{Analytic, CorrelationProvider};
use crate::ensemble::Estimate;
use crate::error::{degenerate, invalid, Result};
use crate::field::{Angle, SchmidtPair};
use crate::optimize::coordinate_ascent;

/// Default coarse grid spacing of [`maximize_bell`].
pub const DEFAULT_GRID_STEP: f64 = PI / 36.0;

/// Resolution of the local refinement of [`maximize_bell`].
pub const ANGLE_TOLERANCE: f64 = 1e-9;

/// The four analyzer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellSettings {
    pub a: Angle,
    pub a_prime: Angle,
    pub b: Angle,
    pub b_prime: Angle,
}

impl BellSettings {
    pub fn new(a: impl Into<Angle>, a_prime: impl Into<Angle>, b: impl Into<Angle>, b_prime: impl Into<Angle>) -> Self {
        BellSettings {
            a: a.into(),
            a_prime: a_prime.into(),
            b: b.into(),
            b_prime: b_prime.into(),
        }
    }

    /// Settings reaching `2√2` for the maximally entangled field.
    pub fn tsirelson() -> Self {
        BellSettings::new(0.0, FRAC_PI_4, -FRAC_PI_8, FRAC_PI_8)
    }

    /// `(a, b), (a′, b), (a, b′), (a′, b′)`, the order of the correlations
    /// in [`BellResult`].
    pub fn pairs(&self) -> [(Angle, Angle); 4] {
        [
            (self.a, self.b),
            (self.a_prime, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b_prime),
        ]
    }

    fn to_array(self) -> [f64; 4] {
        [self.a, self.a_prime, self.b, self.b_prime].map(Angle::radians)
    }

    fn from_array(x: [f64; 4]) -> Self {
        BellSettings::new(x[0], x[1], x[2], x[3])
    }
}

/// One evaluation of the Bell parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellResult {
    pub settings: BellSettings,
    /// `C(a,b), C(a′,b), C(a,b′), C(a′,b′)`.
    pub correlations: [f64; 4],
    pub correlation_stderrs: [f64; 4],
    pub b_value: f64,
    pub stderr: f64,
}

impl BellResult {
    pub fn violates_classical_bound(&self) -> bool {
        self.b_value > 2.0
    }
}

/// `C(a,b) − C(a′,b) + C(a,b′) + C(a′,b′)` before the absolute value.
pub fn bell_combination(c: &[f64; 4]) -> f64 {
    c[0] - c[1] + c[2] + c[3]
}

/// Evaluate ℬ with any correlation provider. Standard errors of the four
/// correlations are combined in quadrature.
pub fn chsh<P: CorrelationProvider + ?Sized>(settings: BellSettings, provider: &P) -> Result<BellResult> {
    let mut correlations = [0.0; 4];
    let mut correlation_stderrs = [0.0; 4];
    for (i, (a, b)) in settings.pairs().into_iter().enumerate() {
        let c = provider.correlation(a, b)?;
        correlations[i] = c.value;
        correlation_stderrs[i] = c.stderr;
    }
    Ok(BellResult {
        settings,
        correlations,
        correlation_stderrs,
        b_value: bell_combination(&correlations).abs(),
        stderr: correlation_stderrs.iter().map(|s| s * s).sum::<f64>().sqrt(),
    })
}

/// The κ-parameterized four-line expansion, with the minus sign on
/// `C(a, b′)`:
///
/// ```text
/// cos2a(cos2b − cos2b′) + cos2a′(cos2b + cos2b′)
///   + 2κ₁κ₂[sin2a(sin2b − sin2b′) + sin2a′(sin2b + sin2b′)]
/// ```
///
/// It equals [`chsh`] at `(a′, a, b′, b)`.
pub fn bell_expanded(settings: BellSettings, schmidt: SchmidtPair) -> f64 {
    let [a, ap, b, bp] = settings.to_array().map(|x| 2.0 * x);
    let k = 2.0 * schmidt.product();
    let value = a.cos() * (b.cos() - bp.cos())
        + ap.cos() * (b.cos() + bp.cos())
        + k * (a.sin() * (b.sin() - bp.sin()) + ap.sin() * (b.sin() + bp.sin()));
    value.abs()
}

/// `2√(1 + 4κ₁²κ₂²)`, the largest ℬ reachable with the field.
pub fn closed_form_max(schmidt: SchmidtPair) -> f64 {
    let k = schmidt.product();
    2.0 * (1.0 + 4.0 * k * k).sqrt()
}

/// `β` with `cos 2β = 1/√(1 + 4κ₁²κ₂²)`.
fn gisin_beta(schmidt: SchmidtPair) -> Result<f64> {
    let k = schmidt.product();
    if !(k > 0.0) {
        return Err(degenerate("Gisin angles need κ₁κ₂ > 0"));
    }
    Ok(0.5 * (1.0 / (1.0 + 4.0 * k * k).sqrt()).acos())
}

/// Optimal settings for [`chsh`]: `a = 0, a′ = π/4, b = −β, b′ = β`.
pub fn gisin_settings(schmidt: SchmidtPair) -> Result<BellSettings> {
    let beta = gisin_beta(schmidt)?;
    Ok(BellSettings::new(0.0, FRAC_PI_4, -beta, beta))
}

/// Optimal settings for [`bell_expanded`]: `a = 0, a′ = π/4` and
/// `cos 2b = −cos 2b′ = 1/√(1 + 4κ₁²κ₂²)`.
pub fn gisin_settings_expanded(schmidt: SchmidtPair) -> Result<BellSettings> {
    let beta = gisin_beta(schmidt)?;
    Ok(BellSettings::new(0.0, FRAC_PI_4, beta, FRAC_PI_2 - beta))
}

/// Maximize the closed-form ℬ of a field over all settings.
pub fn maximize_bell(schmidt: SchmidtPair) -> BellResult {
    maximize_bell_with(&Analytic { schmidt }, DEFAULT_GRID_STEP).expect("closed-form correlations never fail")
}

/// Maximize ℬ for any provider: exhaustive search over a grid of spacing
/// `grid_step` on `[0, π)`, then cyclic golden-section refinement of each
/// angle to [`ANGLE_TOLERANCE`].
pub fn maximize_bell_with<P: CorrelationProvider + ?Sized>(provider: &P, grid_step: f64) -> Result<BellResult> {
    if !(grid_step > 0.0 && grid_step <= FRAC_PI_2) {
        return Err(invalid(format!("grid step must lie in (0, π/2], got {grid_step}")));
    }
    let n = (PI / grid_step).round().max(2.0) as usize;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * grid_step).collect();
    let table: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            provider
                .correlation(Angle::new(grid[i]), Angle::new(grid[j]))
                .map(|c| c.value)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let c = |i: usize, j: usize| table[i * n + j];

    // Best signed combination for each (a, a′), in index order.
    let best = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (ia, iap) = (idx / n, idx % n);
            let mut local: Option<(f64, [usize; 4])> = None;
            for ib in 0..n {
                let head = c(ia, ib) - c(iap, ib);
                for ibp in 0..n {
                    let s = head + c(ia, ibp) + c(iap, ibp);
                    if s.is_nan() {
                        continue;
                    }
                    if local.is_none_or(|(v, _)| s.abs() > v.abs()) {
                        local = Some((s, [ia, iap, ib, ibp]));
                    }
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, [usize; 4])>, cand| match acc {
            Some((v, _)) if v.abs() >= cand.0.abs() => acc,
            _ => Some(cand),
        });
    let (signed, idx) = best.ok_or_else(|| degenerate("no grid point yields a finite correlation"))?;
    let sign = if signed < 0.0 { -1.0 } else { 1.0 };

    let objective = |x: &[f64; 4]| match chsh_signed(provider, BellSettings::from_array(*x)) {
        Ok(v) => sign * v,
        Err(_) => f64::NEG_INFINITY,
    };
    let start = idx.map(|i| grid[i]);
    let (x, _) = coordinate_ascent(objective, start, grid_step, ANGLE_TOLERANCE, 1e-12, 10_000);
    chsh(BellSettings::from_array(x), provider)
}

fn chsh_signed<P: CorrelationProvider + ?Sized>(provider: &P, settings: BellSettings) -> Result<f64> {
    let mut c = [0.0; 4];
    for (i, (a, b)) in settings.pairs().into_iter().enumerate() {
        c[i] = provider.correlation(a, b)?.value;
    }
    Ok(bell_combination(&c))
}

/// One point of a correlation scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub a: Angle,
    pub b: Angle,
    pub correlation: Estimate,
}

/// `C(a, b)` across `a_grid` at fixed `b`, in grid order.
pub fn scan_correlation<P: CorrelationProvider + ?Sized>(
    b: Angle,
    a_grid: &[Angle],
    provider: &P,
) -> Result<Vec<ScanPoint>> {
    if a_grid.is_empty() {
        return Err(invalid("scan grid is empty"));
    }
    a_grid
        .par_iter()
        .map(|&a| {
            provider
                .correlation(a, b)
                .map(|correlation| ScanPoint { a, b, correlation })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::correlation_analytic;
    use crate::polarimetry::schmidt_from_dop;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn analytic(k: SchmidtPair) -> Analytic {
        Analytic { schmidt: k }
    }

    fn eq8_oracle(s: &BellSettings, k: SchmidtPair) -> f64 {
        let c = |a: Angle, b: Angle| correlation_analytic(a, b, k);
        (c(s.a, s.b) - c(s.a_prime, s.b) + c(s.a, s.b_prime) + c(s.a_prime, s.b_prime)).abs()
    }

    #[test]
    fn tsirelson_settings() {
        let r = chsh(BellSettings::tsirelson(), &analytic(SchmidtPair::unpolarized())).unwrap();
        assert!((r.b_value - 2.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn separable_field_never_exceeds_two() {
        let k = SchmidtPair::polarized();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let s = BellSettings::new(
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
            );
            assert!(chsh(s, &analytic(k)).unwrap().b_value <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn optimized_dop_eighth_field() {
        let k = schmidt_from_dop(0.125).unwrap();
        let r = maximize_bell(k);
        assert!((r.b_value - 2.817356917396161).abs() < 1e-6);
        assert!((r.b_value - 2.817).abs() < 1e-3);
    }

    #[test]
    fn maximize_examples() {
        let r = maximize_bell(SchmidtPair::unpolarized());
        assert!((r.b_value - 2.0 * SQRT_2).abs() < 1e-6);
        let r = maximize_bell(SchmidtPair::polarized());
        assert!((r.b_value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bell_expanded_examples() {
        let unpol = SchmidtPair::unpolarized();
        let tsirelson = BellSettings::new(0.0, FRAC_PI_4, FRAC_PI_8, 3.0 * FRAC_PI_8);
        assert!((bell_expanded(tsirelson, unpol) - 2.0 * SQRT_2).abs() < 1e-12);
        // With b′ = −b both sign placements cancel.
        let mirrored = BellSettings::new(0.0, FRAC_PI_4, FRAC_PI_8, -FRAC_PI_8);
        assert!(bell_expanded(mirrored, unpol) < 1e-12);
        assert!(chsh(mirrored, &analytic(unpol)).unwrap().b_value < 1e-12);
        let zero = BellSettings::new(0.0, 0.0, 0.0, 0.0);
        assert!((bell_expanded(zero, SchmidtPair::from_kappa1(0.8).unwrap()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bell_expanded_is_relabelled_chsh() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let k = SchmidtPair::from_kappa1(rng.random_range(FRAC_1_SQRT_2..1.0)).unwrap();
            let s = BellSettings::new(
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
            );
            let relabelled = BellSettings::new(s.a_prime, s.a, s.b_prime, s.b);
            let via_chsh = chsh(relabelled, &analytic(k)).unwrap().b_value;
            assert!((bell_expanded(s, k) - via_chsh).abs() < 1e-12);
        }
    }

    #[test]
    fn gisin_examples() {
        let unpol = SchmidtPair::unpolarized();
        let s = gisin_settings_expanded(unpol).unwrap();
        assert!((s.b.radians() - FRAC_PI_8).abs() < 1e-12);
        assert!(((2.0 * s.b.radians()).cos() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((bell_expanded(s, unpol) - 2.0 * SQRT_2).abs() < 1e-12);
        let s = gisin_settings(unpol).unwrap();
        assert!((chsh(s, &analytic(unpol)).unwrap().b_value - 2.0 * SQRT_2).abs() < 1e-12);

        let k = schmidt_from_dop(0.125).unwrap();
        let g = chsh(gisin_settings(k).unwrap(), &analytic(k)).unwrap().b_value;
        assert!((g - maximize_bell(k).b_value).abs() < 1e-6);
        assert!((g - closed_form_max(k)).abs() < 1e-12);
        let g = bell_expanded(gisin_settings_expanded(k).unwrap(), k);
        assert!((g - closed_form_max(k)).abs() < 1e-12);

        assert!(matches!(
            gisin_settings(SchmidtPair::polarized()),
            Err(crate::Error::Degenerate(_))
        ));
        let tiny = SchmidtPair::new((1.0f64 - 1e-40).sqrt(), 0.0).unwrap();
        assert!(gisin_settings(tiny).is_err());
    }

    #[test]
    fn violation_iff_entangled() {
        for product in [0.0f64, 1e-3, 0.1, 0.3, 0.5] {
            // κ₁κ₂ = p  ⇔  κ₁² = (1 + √(1 − 4p²))/2
            let k1 = ((1.0 + (1.0 - 4.0 * product * product).sqrt()) / 2.0).sqrt();
            let k = SchmidtPair::from_kappa1(k1).unwrap();
            let b = maximize_bell(k).b_value;
            assert_eq!(b > 2.0 + 1e-9, product > 0.0, "κ₁κ₂ = {product}: ℬ = {b}");
            assert!((b - closed_form_max(k)).abs() < 1e-6);
        }
    }

    #[test]
    fn maximum_increases_with_entanglement() {
        let mut last = 0.0;
        for i in 0..=10 {
            let k1 = 1.0 - i as f64 * (1.0 - FRAC_1_SQRT_2) / 10.0;
            let b = maximize_bell(SchmidtPair::from_kappa1(k1).unwrap()).b_value;
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn scan_examples() {
        let unpol = analytic(SchmidtPair::unpolarized());
        let grid: Vec<Angle> = (0..37).map(|i| Angle::new(i as f64 * PI / 36.0)).collect();
        let b = Angle::new(0.4);
        let curve = scan_correlation(b, &grid, &unpol).unwrap();
        for (p, a) in curve.iter().zip(&grid) {
            assert_eq!(p.a, *a);
            assert!((p.correlation.value - (2.0 * (a.radians() - 0.4)).cos()).abs() < 1e-12);
        }
        let shifted = scan_correlation(
            b + Angle::new(FRAC_PI_4),
            &grid.iter().map(|&a| a + Angle::new(FRAC_PI_4)).collect::<Vec<_>>(),
            &unpol,
        )
        .unwrap();
        for (p, q) in curve.iter().zip(&shifted) {
            assert!((p.correlation.value - q.correlation.value).abs() < 1e-12);
        }
        let pol = analytic(SchmidtPair::polarized());
        for p in scan_correlation(b, &grid, &pol).unwrap() {
            assert!((p.correlation.value - (2.0 * p.a.radians()).cos() * 0.8f64.cos()).abs() < 1e-12);
        }
        assert!(scan_correlation(b, &[], &unpol).is_err());
    }

    #[test]
    fn optimizer_matches_closed_form_for_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let k = SchmidtPair::from_kappa1(rng.random_range(FRAC_1_SQRT_2..1.0)).unwrap();
            let r = maximize_bell(k);
            assert!((r.b_value - closed_form_max(k)).abs() < 1e-6, "{k:?}: {}", r.b_value);
            let g = chsh(gisin_settings(k).unwrap(), &analytic(k)).unwrap().b_value;
            assert!((g - r.b_value).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn chsh_below_kappa_ceiling(
            kappa1 in FRAC_1_SQRT_2..1.0f64,
            a in -PI..PI, ap in -PI..PI, b in -PI..PI, bp in -PI..PI,
        ) {
            let k = SchmidtPair::from_kappa1(kappa1).unwrap();
            let s = BellSettings::new(a, ap, b, bp);
            let r = chsh(s, &analytic(k)).unwrap();
            prop_assert!(r.b_value <= closed_form_max(k) + 1e-9);
            prop_assert!((r.b_value - eq8_oracle(&s, k)).abs() < 1e-12);
            prop_assert!((r.b_value - bell_combination(&r.correlations).abs()).abs() < 1e-12);
            for c in r.correlations {
                prop_assert!(c.abs() <= 1.0 + 1e-12);
            }
        }
    }
}
