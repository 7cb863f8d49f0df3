//! Deterministic maximization over a few angles.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[lo, hi]`, to bracket width `tol`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Cyclic coordinate ascent. Each coordinate is refined by golden section on
/// `[x − radius, x + radius]`; passes repeat until a full pass improves the
/// objective by less than `min_gain`.
pub fn coordinate_ascent<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64,
    start: [f64; N],
    radius: f64,
    tol: f64,
    min_gain: f64,
    max_passes: usize,
) -> ([f64; N], f64) {
    let mut x = start;
    let mut best = f(&x);
    for _ in 0..max_passes {
        let before = best;
        for i in 0..N {
            let centre = x[i];
            let (xi, fi) = golden_max(
                |t| {
                    let mut y = x;
                    y[i] = t;
                    f(&y)
                },
                centre - radius,
                centre + radius,
                tol,
            );
            if fi > best {
                x[i] = xi;
                best = fi;
            }
        }
        if best - before < min_gain {
            break;
        }
    }
    (x, best)
}
