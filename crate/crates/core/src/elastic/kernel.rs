//! Per-wavenumber layered boundary-value solve and the cached kernel.
//!
//! In a layer, with `t = m (z - z_top)` the scaled local depth and
//! `κ = 3 - 4ν`, the transformed displacements `U(t) J1(m r)` (radial) and
//! `W(t) J0(m r)` (vertical, downward) are combinations of
//!
//! ```text
//! decaying:  (U, W) = (1, 1) e^-t,          (t - κ, t) e^-t
//! growing:   (U, W) = (-1, 1) e^s,          (-s - κ, s) e^s,    s = t - m h
//! ```
//!
//! so every basis value is bounded by one inside its layer and nothing
//! overflows however large `m h` gets. Normal and shear stress transforms
//! are `S = λU + (λ+2μ)W'` and `T = μ(U' - W)`. A semi-infinite layer keeps
//! only the decaying pair. The surface carries `S = -1`, `T = 0`; bonded
//! interfaces impose continuity of `U, W, S, T`. `F(m)` is the surface `W`.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::PavementStructure;

/// Basis values `(U, W, S, T)` of the four layer solutions at local depth
/// `t`; stresses are divided by `stress_scale`.
fn basis<T: Real>(t: T, layer_h: Option<T>, lambda: T, mu: T, kappa: T, stress_scale: T) -> [[T; 4]; 4] {
    let two_mu = mu + mu;
    let lam2mu = lambda + two_mu;
    let row = |u: T, du: T, w: T, dw: T| {
        [u, w, (lambda * u + lam2mu * dw) / stress_scale, mu * (du - w) / stress_scale]
    };
    let e = (-t).exp();
    let mut out = [[T::zero(); 4]; 4];
    out[0] = row(e, -e, e, -e);
    out[1] = row((t - kappa) * e, (T::one() - t + kappa) * e, t * e, (T::one() - t) * e);
    if let Some(h) = layer_h {
        let s = t - h;
        let g = s.exp();
        out[2] = row(-g, -g, g, g);
        out[3] = row((-s - kappa) * g, (-T::one() - s - kappa) * g, s * g, (T::one() + s) * g);
    }
    out
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `false` when a pivot vanishes or is not finite.
fn solve_dense<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> bool {
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pmax.is_finite() && pmax > T::zero()) {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] = a[r * n + k] - f * v;
            }
            b[r] = b[r] - f * b[col];
        }
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for k in r + 1..n {
            acc = acc - a[r * n + k] * b[k];
        }
        b[r] = acc / a[r * n + r];
    }
    b.iter().all(|v| v.is_finite())
}

fn kernel_unchecked<T: Real>(structure: &PavementStructure<T>, m: T) -> Option<T> {
    let layers = structure.layers();
    let n_layers = layers.len();
    if n_layers == 1 {
        return Some(layers[0].halfspace_kernel());
    }
    let params: Vec<(T, T, T, Option<T>)> = layers
        .iter()
        .map(|l| {
            let (lambda, mu) = l.lame();
            let kappa = T::c(3.0) - T::c(4.0) * l.poissons_ratio;
            (lambda, mu, kappa, l.thickness.finite().map(|h| m * h))
        })
        .collect();
    let stress_scale = params[0].1;
    let n = 4 * (n_layers - 1) + 2;
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];

    let width = |i: usize| if i + 1 == n_layers { 2 } else { 4 };

    // surface tractions
    let (lam, mu, kap, h) = params[0];
    let top = basis(T::zero(), h, lam, mu, kap, stress_scale);
    for j in 0..width(0) {
        a[j] = top[j][2];
        a[n + j] = top[j][3];
    }
    b[0] = -T::one();

    // interface continuity
    for i in 0..n_layers - 1 {
        let (lam, mu, kap, h) = params[i];
        let h_val = h.expect("finite layer above an interface");
        let above = basis(h_val, h, lam, mu, kap, stress_scale);
        let (lam2, mu2, kap2, h2) = params[i + 1];
        let below = basis(T::zero(), h2, lam2, mu2, kap2, stress_scale);
        let row0 = 2 + 4 * i;
        for q in 0..4 {
            let r = (row0 + q) * n;
            for j in 0..4 {
                a[r + 4 * i + j] = above[j][q];
            }
            for j in 0..width(i + 1) {
                a[r + 4 * (i + 1) + j] = -below[j][q];
            }
        }
    }

    if !solve_dense(&mut a, &mut b, n) {
        return None;
    }
    let w_surface = (0..width(0)).fold(T::zero(), |acc, j| acc + b[j] * top[j][1]);
    Some(w_surface / stress_scale)
}

/// Surface response kernel `F(m)` in 1/Pa for wavenumber `m` in 1/m.
pub fn surface_response_kernel<T: Real>(structure: &PavementStructure<T>, m: T) -> Result<T> {
    if !(m.is_finite() && m > T::zero()) {
        return Err(Error::invalid("wavenumber", format!("{m} must be positive and finite")));
    }
    match kernel_unchecked(structure, m) {
        Some(f) if f.is_finite() && f > T::zero() => Ok(f),
        _ => Err(Error::Conditioning {
            m: m.as_f64(),
            structure: structure.id(),
        }),
    }
}

/// Sampling layout of the kernel cache on a uniform grid in `ln m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid {
    /// Lowest node as `m · h_total`.
    pub low_mh_total: f64,
    /// Highest node as `m · h_top`.
    pub high_mh_top: f64,
    pub nodes_per_decade: usize,
}

impl Default for KernelGrid {
    fn default() -> Self {
        Self {
            low_mh_total: 1e-7,
            high_mh_top: 25.0,
            nodes_per_decade: 100,
        }
    }
}

/// `F(m)` sampled once per structure and interpolated in `ln m`.
///
/// Above the top node the kernel is the top-layer half-space value (the
/// layered correction decays like `e^{-2 m h_top}`, and nodes where it has
/// fallen to rounding level are dropped). Below the bottom node
/// it is linear in `m`, anchored at the subgrade value for `m → 0`.
#[derive(Debug, Clone)]
pub struct SurfaceKernelSamples<T> {
    structure_id: String,
    ln_m0: T,
    d_ln_m: T,
    /// `F(m_k) - F(∞)` at each node.
    residual: Vec<T>,
    f_top: T,
    f_subgrade: T,
}

impl<T: Real> SurfaceKernelSamples<T> {
    pub fn build(structure: &PavementStructure<T>) -> Result<Self> {
        Self::with_grid(structure, KernelGrid::default())
    }

    pub fn with_grid(structure: &PavementStructure<T>, grid: KernelGrid) -> Result<Self> {
        let f_top = structure.top().halfspace_kernel();
        let f_subgrade = structure.subgrade().halfspace_kernel();
        let structure_id = structure.id();
        let Some(h_top) = structure.top().thickness.finite() else {
            return Ok(Self {
                structure_id,
                ln_m0: T::zero(),
                d_ln_m: T::one(),
                residual: Vec::new(),
                f_top,
                f_subgrade,
            });
        };
        let m_lo = T::c(grid.low_mh_total) / structure.total_thickness();
        let m_hi = T::c(grid.high_mh_top) / h_top;
        let d_ln_m = T::LN_10() / T::from_usize_lossy(grid.nodes_per_decade.max(1));
        let ln_m0 = m_lo.ln();
        let count = ((m_hi.ln() - ln_m0) / d_ln_m).ceil().to_usize().unwrap_or(0) + 1;
        let mut residual = (0..count)
            .map(|k| {
                let m = (ln_m0 + d_ln_m * T::from_usize_lossy(k)).exp();
                surface_response_kernel(structure, m).map(|f| f - f_top)
            })
            .collect::<Result<Vec<_>>>()?;
        // drop the tail that is only rounding noise of the layer solve
        let floor = T::c(64.0) * T::epsilon() * f_top.abs().max(f_subgrade.abs());
        while residual.len() > 6 && residual.last().is_some_and(|r| r.abs() <= floor) {
            residual.pop();
        }
        Ok(Self {
            structure_id,
            ln_m0,
            d_ln_m,
            residual,
            f_top,
            f_subgrade,
        })
    }

    /// Kernel multiplied by `k`, the compliance of the structure with every
    /// modulus divided by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            structure_id: format!("{}*{k}", self.structure_id),
            residual: self.residual.iter().map(|&r| r * k).collect(),
            f_top: self.f_top * k,
            f_subgrade: self.f_subgrade * k,
            ..self.clone()
        }
    }

    /// True for a homogeneous half-space, whose kernel is a constant.
    pub fn is_constant(&self) -> bool {
        self.residual.is_empty()
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    /// Wavenumber nodes in 1/m.
    pub fn nodes(&self) -> Vec<T> {
        (0..self.residual.len())
            .map(|k| (self.ln_m0 + self.d_ln_m * T::from_usize_lossy(k)).exp())
            .collect()
    }

    /// Kernel values at [`Self::nodes`], 1/Pa.
    pub fn values(&self) -> Vec<T> {
        self.residual.iter().map(|&r| r + self.f_top).collect()
    }

    /// `lim_{m→∞} F(m)`.
    pub fn f_top(&self) -> T {
        self.f_top
    }

    /// `lim_{m→0} F(m)`.
    pub fn f_subgrade(&self) -> T {
        self.f_subgrade
    }

    /// `F(m) - F(∞)`, the part of the kernel that decays with `m`.
    #[inline]
    pub fn residual(&self, m: T) -> T {
        let n = self.residual.len();
        if n == 0 {
            return T::zero();
        }
        let pos = (m.ln() - self.ln_m0) / self.d_ln_m;
        if pos <= T::zero() {
            let r0 = self.residual[0];
            let r_sub = self.f_subgrade - self.f_top;
            let frac = (self.ln_m0.exp()).recip() * m;
            return r_sub + (r0 - r_sub) * frac;
        }
        let last = T::from_usize_lossy(n - 1);
        if pos >= last {
            return T::zero();
        }
        lagrange6(&self.residual, pos)
    }

    /// Interpolated `F(m)`.
    #[inline]
    pub fn eval(&self, m: T) -> T {
        self.f_top + self.residual(m)
    }
}

/// Six-point Lagrange interpolation on unit-spaced samples at fractional
/// index `pos` (inside the sample range).
#[inline]
fn lagrange6<T: Real>(y: &[T], pos: T) -> T {
    let n = y.len();
    if n < 6 {
        // linear fallback for tiny grids
        let i = pos.floor().to_usize().unwrap_or(0).min(n.saturating_sub(2));
        let f = pos - T::from_usize_lossy(i);
        return y[i] + (y[i + 1] - y[i]) * f;
    }
    let i = pos.floor().to_usize().unwrap_or(0);
    let start = i.saturating_sub(2).min(n - 6);
    let x = pos - T::from_usize_lossy(start);
    let mut acc = T::zero();
    for j in 0..6 {
        let xj = T::from_usize_lossy(j);
        let mut w = T::one();
        for k in 0..6 {
            if k != j {
                let xk = T::from_usize_lossy(k);
                w = w * (x - xk) / (xj - xk);
            }
        }
        acc = acc + w * y[start + j];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::{reference_structure, ElasticLayer};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn halfspace_kernel_is_boussinesq() {
        let s = PavementStructure::halfspace(50e6, 0.35f64).unwrap();
        for m in [1e-3, 1.0, 1e4] {
            assert_eq!(surface_response_kernel(&s, m).unwrap(), 2.0 * (1.0 - 0.35f64 * 0.35) / 50e6);
        }
    }

    #[test]
    fn two_identical_layers_reduce_to_halfspace() {
        let s = PavementStructure::new(vec![
            ElasticLayer::finite(0.2, 300e6, 0.3f64),
            ElasticLayer::semi_infinite(300e6, 0.3),
        ])
        .unwrap();
        let expect = 2.0 * (1.0 - 0.09) / 300e6;
        for m in [1e-4, 0.1, 3.0, 50.0, 1e4] {
            let f = surface_response_kernel(&s, m).unwrap();
            assert!(rel(f, expect) < 1e-12, "m = {m}: {f} vs {expect}");
        }
    }

    // 50-digit references from two independent formulations (global
    // coefficient matrix and a matrix-exponential propagator).
    const REFERENCE_16: [(f64, f64); 4] = [
        (1e-6, 1.0968596490304e-7),
        (1e-2, 1.05402570854956e-7),
        (1.0, 4.76905769930749e-8),
        (10.0, 2.76968641194193e-10),
    ];
    const REFERENCE_250: [(f64, f64); 4] = [
        (1e-6, 7.01999333612738e-9),
        (1e-2, 6.96241070407693e-9),
        (1.0, 5.87313537067774e-9),
        (10.0, 2.7117539728735e-10),
    ];

    #[test]
    fn reference_structure_against_high_precision() {
        for (e, table) in [(16e6, REFERENCE_16), (250e6, REFERENCE_250)] {
            let s = reference_structure(e).unwrap();
            for (m, want) in table {
                let got = surface_response_kernel(&s, m).unwrap();
                assert!(rel(got, want) < 1e-9, "E={e}, m={m}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn short_wavelength_limit() {
        for e in [16e6, 100e6, 250e6] {
            let s = reference_structure(e).unwrap();
            let top = 2.0 * (1.0 - 0.35f64.powi(2)) / 7000e6;
            assert!(rel(surface_response_kernel(&s, 1e4).unwrap(), top) < 1e-6);
        }
    }

    #[test]
    fn long_wavelength_limit() {
        // The layered correction is first order in m h, so the subgrade
        // value is approached only once m h_total is well below 1e-6.
        for e in [16e6, 100e6, 250e6] {
            let s = reference_structure(e).unwrap();
            let sub = 2.0 * (1.0 - 0.35f64.powi(2)) / e;
            let m = 1e-8 / 0.24;
            assert!(rel(surface_response_kernel(&s, m).unwrap(), sub) < 1e-6);
        }
    }

    #[test]
    fn extreme_wavenumbers_do_not_overflow() {
        let s = reference_structure(16e6).unwrap();
        for m in [1e5f64, 1e7, 1e9] {
            let f = surface_response_kernel(&s, m).unwrap();
            assert!(f.is_finite() && f > 0.0);
        }
    }

    #[test]
    fn rejects_bad_wavenumber() {
        let s = reference_structure(16e6).unwrap();
        assert!(surface_response_kernel(&s, 0.0).is_err());
        assert!(surface_response_kernel(&s, f64::NAN).is_err());
    }

    #[test]
    fn cache_interpolation_matches_direct_solve() {
        let s = reference_structure(40e6).unwrap();
        let cache = SurfaceKernelSamples::build(&s).unwrap();
        assert!(cache.nodes().len() >= 400);
        let mut m = 1e-6;
        while m < 1e5 {
            let direct = surface_response_kernel(&s, m).unwrap();
            let interp = cache.eval(m);
            assert!(rel(interp, direct) < 1e-9, "m = {m}: {interp} vs {direct}");
            m *= 1.37;
        }
    }

    #[test]
    fn kernel_positive_and_bounded_by_limits() {
        let s = reference_structure(100e6).unwrap();
        let cache = SurfaceKernelSamples::build(&s).unwrap();
        for f in cache.values() {
            assert!(f > 0.0);
            // every layer is stiffer than the subgrade
            assert!(f <= cache.f_subgrade() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn single_precision_solve() {
        let s = reference_structure(100e6f32).unwrap();
        let f = surface_response_kernel(&s, 1.0f32).unwrap() as f64;
        let d = surface_response_kernel(&reference_structure(100e6f64).unwrap(), 1.0).unwrap();
        assert!(rel(f, d) < 1e-3);
    }
}
