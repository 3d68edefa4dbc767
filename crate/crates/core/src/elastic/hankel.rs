//! Oscillatory quadrature for `∫₀^∞ F(m)/m · J1(m a) · J0(m r) dm`.
//!
//! The axis is cut at successive zeros of whichever Bessel factor
//! oscillates faster, each piece is integrated with adaptive Gauss-Kronrod
//! (7/15), and the sequence of partial sums is extrapolated with Wynn's
//! epsilon algorithm.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::bessel::{bessel_zero, j0, j1};

/// Default per-integral kernel-evaluation budget.
pub const DEFAULT_BUDGET: usize = 20_000;

const MIN_INTERVALS: usize = 4;
const EPSILON_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy)]
pub struct HankelOptions<T> {
    /// Relative tolerance between successive accelerated estimates.
    pub tol: T,
    /// Kernel evaluations allowed before declaring non-convergence.
    pub budget: usize,
}

impl<T: Real> HankelOptions<T> {
    pub fn new(tol: T) -> Self {
        Self {
            tol,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelResult<T> {
    pub value: T,
    pub evaluations: usize,
    pub intervals: usize,
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One GK15 panel: returns `(kronrod, error estimate, |f| integral)`.
fn gk15<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> (T, T, T) {
    let center = (lo + hi) * T::c(0.5);
    let half = (hi - lo) * T::c(0.5);
    let fc = f(center);
    let mut res_k = fc * T::c(WGK[7]);
    let mut res_g = fc * T::c(WG[3]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half * T::c(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + T::c(WGK[j]) * (f1 + f2);
        res_abs = res_abs + T::c(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::c(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * T::c(0.5);
    let mut res_asc = T::c(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::c(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let res_asc = res_asc * h;
    let res_abs = res_abs * h;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::c(200.0) * err / res_asc).powf(T::c(1.5));
        err = res_asc * scale.min(T::one());
    }
    let floor = T::c(50.0) * T::epsilon() * res_abs;
    (res_k * half, err.max(floor), res_abs)
}

/// Adaptive GK15 on `[lo, hi]` to absolute accuracy `abs_tol`.
/// Panels whose error estimate is already at the rounding floor are not
/// split further. Returns `(value, evaluations)`.
fn adaptive<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T, abs_tol: impl Fn(T) -> T, budget: usize) -> (T, usize) {
    let (first, err, abs) = gk15(f, lo, hi);
    let mut evals = 15;
    let target = abs_tol(first);
    let noise = |abs: T| T::c(100.0) * T::epsilon() * abs;
    if err <= target || err <= noise(abs) {
        return (first, evals);
    }
    let width = hi - lo;
    let mut total = T::zero();
    let mut stack = vec![(lo, hi, first, err, abs)];
    while let Some((a, b, val, e, abs)) = stack.pop() {
        let share = target * (b - a) / width;
        if e <= share || e <= noise(abs) || evals >= budget || (b - a) <= T::epsilon() * T::c(8.0) * b.abs() {
            total = total + val;
            continue;
        }
        let mid = (a + b) * T::c(0.5);
        let (v1, e1, a1) = gk15(f, a, mid);
        let (v2, e2, a2) = gk15(f, mid, b);
        evals += 30;
        stack.push((a, mid, v1, e1, a1));
        stack.push((mid, b, v2, e2, a2));
    }
    (total, evals)
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
fn wynn_epsilon<T: Real>(sums: &[T]) -> T {
    let n = sums.len();
    if n < 3 {
        return *sums.last().expect("non-empty");
    }
    let huge = T::max_value().sqrt();
    let mut e = Vec::with_capacity(n);
    for (k, &s) in sums.iter().enumerate() {
        e.push(s);
        let mut aux2 = T::zero();
        for j in (1..=k).rev() {
            let aux1 = aux2;
            aux2 = e[j - 1];
            let diff = e[j] - aux2;
            e[j - 1] = if diff.abs() <= T::min_positive_value() {
                huge
            } else {
                aux1 + diff.recip()
            };
        }
    }
    let est = e[(n - 1) % 2];
    if est.is_finite() && est.abs() < huge {
        est
    } else {
        sums[n - 1]
    }
}

/// Integrates `kernel(m)/m · J1(m a) · J0(m r)` over `m ∈ [0, ∞)`.
pub fn hankel_integrate<T: Real, K: Fn(T) -> T>(kernel: K, a: T, r: T, tol: T) -> Result<T> {
    hankel_integrate_with(kernel, a, r, HankelOptions::new(tol)).map(|res| res.value)
}

pub fn hankel_integrate_with<T: Real, K: Fn(T) -> T>(
    kernel: K,
    a: T,
    r: T,
    opts: HankelOptions<T>,
) -> Result<HankelResult<T>> {
    if !(a.is_finite() && a > T::zero()) {
        return Err(Error::invalid("load radius", format!("{a} must be positive")));
    }
    if !(r.is_finite() && r >= T::zero()) {
        return Err(Error::invalid("radial offset", format!("{r} must be finite and non-negative")));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::invalid("tolerance", format!("{} must be positive", opts.tol)));
    }
    let integrand = |m: T| kernel(m) / m * j1(m * a) * j0(m * r);
    let (order, scale) = if a >= r { (1, a) } else { (0, r) };

    let mut sums: Vec<T> = Vec::new();
    let mut partial = T::zero();
    let mut evaluations = 0usize;
    let mut lo = T::zero();
    let mut prev_estimate: Option<T> = None;
    let mut agreements = 0;
    let mut quiet = 0;
    let mut k = 1usize;
    loop {
        let hi = T::c(bessel_zero(order, k)) / scale;
        let running = partial;
        let tol = opts.tol;
        let (piece, used) = adaptive(
            &integrand,
            lo,
            hi,
            |coarse: T| T::c(0.1) * tol * running.abs().max(coarse.abs()).max(T::min_positive_value()),
            opts.budget.saturating_sub(evaluations),
        );
        evaluations += used;
        partial = partial + piece;
        sums.push(partial);
        if sums.len() > EPSILON_WINDOW {
            sums.remove(0);
        }

        // integrand has died out: plain sum is final
        if piece.abs() <= T::epsilon() * partial.abs() {
            quiet += 1;
            if quiet >= 2 && k >= MIN_INTERVALS {
                return Ok(HankelResult {
                    value: partial,
                    evaluations,
                    intervals: k,
                });
            }
        } else {
            quiet = 0;
        }

        let estimate = wynn_epsilon(&sums);
        if let Some(prev) = prev_estimate {
            if k >= MIN_INTERVALS && (estimate - prev).abs() <= opts.tol * estimate.abs() {
                agreements += 1;
                if agreements >= 2 {
                    return Ok(HankelResult {
                        value: estimate,
                        evaluations,
                        intervals: k,
                    });
                }
            } else {
                agreements = 0;
            }
        }
        prev_estimate = Some(estimate);

        if evaluations >= opts.budget {
            return Err(Error::Convergence {
                estimate: estimate.as_f64(),
                evaluations,
            });
        }
        lo = hi;
        k += 1;
    }
}
