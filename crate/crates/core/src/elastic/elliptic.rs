//! Complete elliptic integrals by the arithmetic-geometric mean.

use crate::scalar::Real;

/// Runs the AGM on `(1, k')` and returns `(agm, Σ 2^{n-1} c_n²)`.
fn agm<T: Real>(k: T) -> (T, T) {
    let mut a = T::one();
    let mut b = (T::one() - k * k).sqrt();
    let mut c = k;
    let mut pow = T::c(0.5);
    let mut sum = pow * c * c;
    for _ in 0..64 {
        if c.abs() <= T::epsilon() * a {
            break;
        }
        let an = (a + b) * T::c(0.5);
        c = (a - b) * T::c(0.5);
        b = (a * b).sqrt();
        a = an;
        pow = pow + pow;
        sum = sum + pow * c * c;
    }
    (a, sum)
}

/// Complete elliptic integral of the first kind, modulus `k` in `[0, 1)`.
pub fn ellipk<T: Real>(k: T) -> T {
    if k >= T::one() {
        return T::infinity();
    }
    T::FRAC_PI_2() / agm(k).0
}

/// Complete elliptic integral of the second kind, modulus `k` in `[0, 1]`.
pub fn ellipe<T: Real>(k: T) -> T {
    if k >= T::one() {
        return T::one();
    }
    let (a, sum) = agm(k);
    T::FRAC_PI_2() / a * (T::one() - sum)
}
