//! C ABI for the bellfield simulator.
//!
//! Every function returns a [`BfStatus`]; results go through out-pointers.
//! On failure [`bf_last_error`] describes the most recent error on the
//! calling thread. Ensembles are opaque handles released with
//! [`bf_ensemble_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bellfield::correlation::correlation_analytic;
use bellfield::polarimetry::stokes_from_ensemble;
use bellfield::{
    chsh, generate, maximize_bell, schmidt_from_dop, stripping_angle, Angle, BeamState, BellResult, BellSettings,
    CorrelationProvider, DetectorModel, EnsembleParams, EnsembleProtocol, Error, FieldEnsemble, Interferometer,
    SchmidtPair, StokesVector, SymbolicProtocol,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfStatus {
    Ok = 0,
    InvalidArgument = 1,
    Degenerate = 2,
    NullPointer = 3,
    Panic = 4,
}

/// Four analyzer angles in radians: `a, a′, b, b′`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BfSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

/// One Bell evaluation. Correlations are ordered
/// `C(a,b), C(a′,b), C(a,b′), C(a′,b′)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BfBellResult {
    pub settings: BfSettings,
    pub correlations: [f64; 4],
    pub correlation_stderrs: [f64; 4],
    pub b_value: f64,
    pub b_stderr: f64,
}

/// Interferometer imperfections and the detector-noise seed.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BfSetup {
    pub detector_noise: f64,
    pub phase_error: f64,
    pub noise_seed: u64,
}

/// Opaque sampled field ensemble.
pub struct BfEnsemble {
    inner: FieldEnsemble,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BfStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            let status = match e {
                Error::InvalidParameter(_) => BfStatus::InvalidArgument,
                Error::Degenerate(_) => BfStatus::Degenerate,
            };
            set_error(e.to_string());
            status
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("{name} is null"));
            BfStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".to_string());
            BfStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller guarantees a non-null pointer is valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn handle<'a>(p: *const BfEnsemble) -> Result<&'a BfEnsemble, Failure> {
    // SAFETY: non-null handles come from bf_ensemble_new.
    unsafe { p.as_ref() }.ok_or(Failure::Null("ensemble"))
}

fn settings_from(s: &BfSettings) -> BellSettings {
    BellSettings::new(s.a, s.a_prime, s.b, s.b_prime)
}

fn settings_to(s: &BellSettings) -> BfSettings {
    BfSettings {
        a: s.a.radians(),
        a_prime: s.a_prime.radians(),
        b: s.b.radians(),
        b_prime: s.b_prime.radians(),
    }
}

fn result_to(r: &BellResult) -> BfBellResult {
    BfBellResult {
        settings: settings_to(&r.settings),
        correlations: r.correlations,
        correlation_stderrs: r.correlation_stderrs,
        b_value: r.b_value,
        b_stderr: r.stderr,
    }
}

fn interferometer(setup: &BfSetup) -> Result<Interferometer, Failure> {
    Ok(Interferometer {
        detector: DetectorModel::new(setup.detector_noise, setup.detector_noise > 0.0)?,
        phase_error: setup.phase_error,
    })
}

/// Message for the last failure on this thread. Valid until the next failing
/// call on the same thread; empty if none.
#[no_mangle]
pub extern "C" fn bf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Schmidt coefficients of a beam with the given degree of polarization.
#[no_mangle]
pub extern "C" fn bf_schmidt_from_dop(dop: f64, kappa1: *mut f64, kappa2: *mut f64) -> BfStatus {
    guard(|| {
        let (k1, k2) = (out(kappa1, "kappa1")?, out(kappa2, "kappa2")?);
        let k = schmidt_from_dop(dop)?;
        *k1 = k.kappa1();
        *k2 = k.kappa2();
        Ok(())
    })
}

/// Degree of polarization of a Stokes vector.
#[no_mangle]
pub extern "C" fn bf_dop_from_stokes(s0: f64, s1: f64, s2: f64, s3: f64, dop: *mut f64) -> BfStatus {
    guard(|| {
        let dop = out(dop, "dop")?;
        *dop = bellfield::dop(&StokesVector::new(s0, s1, s2, s3)?)?;
        Ok(())
    })
}

/// Closed-form `C(a, b)` for a beam with leading Schmidt coefficient `kappa1`.
#[no_mangle]
pub extern "C" fn bf_correlation_analytic(a: f64, b: f64, kappa1: f64, value: *mut f64) -> BfStatus {
    guard(|| {
        let value = out(value, "value")?;
        *value = correlation_analytic(Angle::new(a), Angle::new(b), SchmidtPair::from_kappa1(kappa1)?);
        Ok(())
    })
}

/// Maximum of ℬ over all settings.
#[no_mangle]
pub extern "C" fn bf_maximize_bell(kappa1: f64, result: *mut BfBellResult) -> BfStatus {
    guard(|| {
        let result = out(result, "result")?;
        *result = result_to(&maximize_bell(SchmidtPair::from_kappa1(kappa1)?));
        Ok(())
    })
}

/// Closed-form optimal settings. Degenerate for a separable beam.
#[no_mangle]
pub extern "C" fn bf_gisin_settings(kappa1: f64, settings: *mut BfSettings) -> BfStatus {
    guard(|| {
        let settings = out(settings, "settings")?;
        *settings = settings_to(&bellfield::gisin_settings(SchmidtPair::from_kappa1(kappa1)?)?);
        Ok(())
    })
}

/// Stripping polarizer angle for function-basis rotation `b`.
#[no_mangle]
pub extern "C" fn bf_stripping_angle(b: f64, kappa1: f64, angle: *mut f64) -> BfStatus {
    guard(|| {
        let angle = out(angle, "angle")?;
        *angle = stripping_angle(Angle::new(b), SchmidtPair::from_kappa1(kappa1)?)?.radians();
        Ok(())
    })
}

/// `P₁₁, P₁₂, P₂₁, P₂₂` reconstructed by the interferometer on an exact beam.
/// `quad` must hold four doubles.
#[no_mangle]
pub extern "C" fn bf_protocol_quad(kappa1: f64, a: f64, b: f64, setup: BfSetup, quad: *mut f64) -> BfStatus {
    guard(|| {
        let quad = out(quad as *mut [f64; 4], "quad")?;
        let kappa = SchmidtPair::from_kappa1(kappa1)?;
        let protocol = SymbolicProtocol {
            source: BeamState::schmidt(kappa, 1.0)?,
            strip_kappa: kappa,
            setup: interferometer(&setup)?,
            noise_seed: setup.noise_seed,
        };
        let q = protocol.quad(Angle::new(a), Angle::new(b))?;
        *quad = [q.p11, q.p12, q.p21, q.p22];
        Ok(())
    })
}

/// Sample a field ensemble. Release with [`bf_ensemble_free`].
#[no_mangle]
pub extern "C" fn bf_ensemble_new(
    kappa1: f64,
    intensity: f64,
    n_realizations: usize,
    samples_per_realization: usize,
    seed: u64,
    ensemble: *mut *mut BfEnsemble,
) -> BfStatus {
    guard(|| {
        let slot = out(ensemble, "ensemble")?;
        *slot = ptr::null_mut();
        let params = EnsembleParams::new(n_realizations, samples_per_realization, seed)?;
        let inner = generate(SchmidtPair::from_kappa1(kappa1)?, intensity, params)?;
        *slot = Box::into_raw(Box::new(BfEnsemble { inner }));
        Ok(())
    })
}

/// Release an ensemble. Null is ignored.
///
/// # Safety
///
/// `ensemble` must be null or a handle from [`bf_ensemble_new`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn bf_ensemble_free(ensemble: *mut BfEnsemble) {
    if !ensemble.is_null() {
        drop(unsafe { Box::from_raw(ensemble) });
    }
}

/// Number of field samples held.
#[no_mangle]
pub extern "C" fn bf_ensemble_len(ensemble: *const BfEnsemble, len: *mut usize) -> BfStatus {
    guard(|| {
        let len = out(len, "len")?;
        *len = handle(ensemble)?.inner.len();
        Ok(())
    })
}

/// Empirical Stokes vector `S₀..S₃`. `stokes` must hold four doubles.
#[no_mangle]
pub extern "C" fn bf_ensemble_stokes(ensemble: *const BfEnsemble, stokes: *mut f64) -> BfStatus {
    guard(|| {
        let stokes = out(stokes as *mut [f64; 4], "stokes")?;
        let s = stokes_from_ensemble(&handle(ensemble)?.inner)?;
        *stokes = [s.s0, s.s1, s.s2, s.s3];
        Ok(())
    })
}

/// `C(a, b)` measured through the interferometer on the sampled field, with
/// the stripping polarizer set for `strip_kappa1`.
#[no_mangle]
pub extern "C" fn bf_ensemble_correlation(
    ensemble: *const BfEnsemble,
    a: f64,
    b: f64,
    strip_kappa1: f64,
    setup: BfSetup,
    value: *mut f64,
    value_stderr: *mut f64,
) -> BfStatus {
    guard(|| {
        let (value, stderr) = (out(value, "value")?, out(value_stderr, "value_stderr")?);
        let e = &handle(ensemble)?.inner;
        let protocol = EnsembleProtocol::new(
            e,
            SchmidtPair::from_kappa1(strip_kappa1)?,
            interferometer(&setup)?,
            setup.noise_seed,
        );
        let c = protocol.correlation(Angle::new(a), Angle::new(b))?;
        *value = c.value;
        *stderr = c.stderr;
        Ok(())
    })
}

/// ℬ measured through the interferometer on the sampled field.
#[no_mangle]
pub extern "C" fn bf_ensemble_bell(
    ensemble: *const BfEnsemble,
    settings: BfSettings,
    strip_kappa1: f64,
    setup: BfSetup,
    result: *mut BfBellResult,
) -> BfStatus {
    guard(|| {
        let result = out(result, "result")?;
        let e = &handle(ensemble)?.inner;
        let protocol = EnsembleProtocol::new(
            e,
            SchmidtPair::from_kappa1(strip_kappa1)?,
            interferometer(&setup)?,
            setup.noise_seed,
        );
        *result = result_to(&chsh(settings_from(&settings), &protocol)?);
        Ok(())
    })
}
