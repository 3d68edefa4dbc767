//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Rational approximations from the Cephes library: on `[0, 5]` a ratio of
//! polynomials in `x²` with the first two zeros factored out, above 5 the
//! Hankel asymptotic form `sqrt(2/(πx)) (P cos χ - (5/x) Q sin χ)` with
//! rational `P`, `Q` in `25/x²`. The phase `χ = x - π/4` (or `x - 3π/4`) is
//! expanded as a combination of `sin x` and `cos x` so the subtraction does
//! not lose digits for large `x`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

const J0_DR1: f64 = 5.783185962946784;
const J0_DR2: f64 = 30.471262343662087;

const J0_RP: [f64; 4] = [
    -4.794432209782018e9,
    1.9561749194655657e12,
    -2.4924834436096772e14,
    9.708622510473064e15,
];
const J0_RQ: [f64; 8] = [
    4.99563147152651e2,
    1.737854016763747e5,
    4.844096583399621e7,
    1.1185553704535683e10,
    2.112775201154892e12,
    3.1051822985742256e14,
    3.1812195594320496e16,
    1.7108629408104315e18,
];
const J0_PP: [f64; 7] = [
    7.969367292973471e-4,
    8.283523921074408e-2,
    1.239533716464143,
    5.447250030587687,
    8.74716500199817,
    5.303240382353949,
    1.0,
];
const J0_PQ: [f64; 7] = [
    9.244088105588637e-4,
    8.562884743544745e-2,
    1.2535274390105895,
    5.470977403304171,
    8.761908832370695,
    5.306052882353947,
    1.0,
];
const J0_QP: [f64; 8] = [
    -1.1366383889846916e-2,
    -1.2825271867050931,
    -1.9553954425773597e1,
    -9.320601521237683e1,
    -1.7768116798048806e2,
    -1.4707750515495118e2,
    -5.141053267665993e1,
    -6.050143506007285,
];
const J0_QQ: [f64; 7] = [
    6.43178256118178e1,
    8.564300259769806e2,
    3.8824018360540163e3,
    7.240467741956525e3,
    5.930727011873169e3,
    2.0620933166032783e3,
    2.420057402402914e2,
];

const J1_Z1: f64 = 1.4681970642123893e1;
const J1_Z2: f64 = 4.92184563216946e1;

const J1_RP: [f64; 4] = [
    -8.999712257055594e8,
    4.5222829799819403e11,
    -7.274942452218183e13,
    3.682957328638529e15,
];
const J1_RQ: [f64; 8] = [
    6.208364781180543e2,
    2.5698725675774884e5,
    8.351467914319493e7,
    2.215115954797925e10,
    4.749141220799914e12,
    7.843696078762359e14,
    8.952223361846274e16,
    5.322786203326801e18,
];
const J1_PP: [f64; 7] = [
    7.621256162081731e-4,
    7.313970569409176e-2,
    1.1271960812968493,
    5.112079511468076,
    8.424045901417724,
    5.214515986823615,
    1.0,
];
const J1_PQ: [f64; 7] = [
    5.713231280725487e-4,
    6.884559087544954e-2,
    1.105142326340617,
    5.073863861286015,
    8.399855543276042,
    5.209828486823619,
    1.0,
];
const J1_QP: [f64; 8] = [
    5.108625947501766e-2,
    4.982138729512334,
    7.582382841325453e1,
    3.667796093601508e2,
    7.108563049989261e2,
    5.974896124006136e2,
    2.1168875710057213e2,
    2.5207020585802372e1,
];
const J1_QQ: [f64; 7] = [
    7.423732770356752e1,
    1.0564488603826283e3,
    4.986410583376536e3,
    9.562318924047562e3,
    7.997041604473507e3,
    2.8261927851763908e3,
    3.360936078106983e2,
];

/// Horner evaluation, highest degree first.
#[inline(always)]
fn polevl<T: Real>(x: T, coef: &[f64]) -> T {
    coef.iter().fold(T::zero(), |acc, &c| acc * x + T::c(c))
}

/// Horner evaluation with an implicit leading coefficient of 1.
#[inline(always)]
fn p1evl<T: Real>(x: T, coef: &[f64]) -> T {
    coef.iter().fold(T::one(), |acc, &c| acc * x + T::c(c))
}

/// `J0(x)` without input validation. Even in `x`.
#[inline]
pub fn j0<T: Real>(x: T) -> T {
    let x = x.abs();
    if x <= T::c(5.0) {
        let z = x * x;
        if x < T::c(1e-5) {
            return T::one() - z / T::c(4.0);
        }
        let p = (z - T::c(J0_DR1)) * (z - T::c(J0_DR2));
        return p * polevl(z, &J0_RP) / p1evl(z, &J0_RQ);
    }
    let w = T::c(5.0) / x;
    let q = w * w;
    let p = polevl(q, &J0_PP) / polevl(q, &J0_PQ);
    let qq = polevl(q, &J0_QP) / p1evl(q, &J0_QQ);
    let (s, c) = x.sin_cos();
    // cos(x - π/4), sin(x - π/4)
    let cos_chi = (c + s) * T::FRAC_1_SQRT_2();
    let sin_chi = (s - c) * T::FRAC_1_SQRT_2();
    (p * cos_chi - w * qq * sin_chi) * (T::FRAC_2_PI() / x).sqrt()
}

/// `J1(x)` without input validation. Odd in `x`.
#[inline]
pub fn j1<T: Real>(x: T) -> T {
    if x < T::zero() {
        return -j1(-x);
    }
    if x <= T::c(5.0) {
        let z = x * x;
        let w = polevl(z, &J1_RP) / p1evl(z, &J1_RQ);
        return w * x * (z - T::c(J1_Z1)) * (z - T::c(J1_Z2));
    }
    let w = T::c(5.0) / x;
    let z = w * w;
    let p = polevl(z, &J1_PP) / polevl(z, &J1_PQ);
    let q = polevl(z, &J1_QP) / p1evl(z, &J1_QQ);
    let (s, c) = x.sin_cos();
    // cos(x - 3π/4), sin(x - 3π/4)
    let cos_chi = (s - c) * T::FRAC_1_SQRT_2();
    let sin_chi = -(s + c) * T::FRAC_1_SQRT_2();
    (p * cos_chi - w * q * sin_chi) * (T::FRAC_2_PI() / x).sqrt()
}

fn check_arg<T: Real>(x: T) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::invalid("bessel argument", format!("{x} is not finite")));
    }
    if x < T::zero() {
        return Err(Error::invalid("bessel argument", format!("{x} is negative")));
    }
    Ok(())
}

/// Bessel function of the first kind, order 0, for finite `x >= 0`.
pub fn bessel_j0<T: Real>(x: T) -> Result<T> {
    check_arg(x)?;
    Ok(j0(x))
}

/// Bessel function of the first kind, order 1, for finite `x >= 0`.
pub fn bessel_j1<T: Real>(x: T) -> Result<T> {
    check_arg(x)?;
    Ok(j1(x))
}

const ZERO_TABLE_LEN: usize = 4096;

fn mcmahon(order: u32, k: usize) -> f64 {
    let mu = 4.0 * f64::from(order * order);
    let beta = (k as f64 + 0.5 * f64::from(order) - 0.25) * std::f64::consts::PI;
    let b8 = 8.0 * beta;
    beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
}

fn refine_zero(order: u32, mut x: f64) -> f64 {
    for _ in 0..20 {
        let (f, df) = if order == 0 {
            (j0(x), -j1(x))
        } else {
            let a = j1(x);
            (a, j0(x) - a / x)
        };
        let step = f / df;
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    x
}

fn zero_table(order: u32) -> &'static [f64] {
    static J0_ZEROS: OnceLock<Vec<f64>> = OnceLock::new();
    static J1_ZEROS: OnceLock<Vec<f64>> = OnceLock::new();
    let cell = if order == 0 { &J0_ZEROS } else { &J1_ZEROS };
    cell.get_or_init(|| {
        (1..=ZERO_TABLE_LEN)
            .map(|k| refine_zero(order, mcmahon(order, k)))
            .collect()
    })
}

/// The `k`-th positive zero (`k >= 1`) of `J0` (`order == 0`) or `J1`
/// (`order == 1`). Beyond the tabulated range McMahon's expansion is used.
pub fn bessel_zero(order: u32, k: usize) -> f64 {
    assert!(order <= 1 && k >= 1);
    let table = zero_table(order);
    if k <= table.len() {
        table[k - 1]
    } else {
        mcmahon(order, k)
    }
}
