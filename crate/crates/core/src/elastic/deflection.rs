use crate::error::{Error, Result};
use crate::scalar::Real;

use super::elliptic::{ellipe, ellipk};
use super::hankel::{hankel_integrate_with, HankelOptions, HankelResult};
use super::kernel::{surface_response_kernel, KernelGrid, SurfaceKernelSamples};
use super::{CircularLoad, PavementStructure};

/// Default relative quadrature tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// `∫₀^∞ J1(m a) J0(m r) / m dm`, the normalised half-space deflection
/// under a unit-pressure disc of radius `a`.
pub fn halfspace_influence<T: Real>(a: T, r: T) -> T {
    let two_over_pi = T::FRAC_2_PI();
    if r < a {
        return two_over_pi * ellipe(r / a);
    }
    if r == a {
        return two_over_pi;
    }
    let k = a / r;
    let k2 = k * k;
    let bracket = if k <= T::c(0.25) {
        // E(k) - (1-k²) K(k) = (π/2) Σ_{n≥1} b_n k^{2n}
        let mut c_prev = T::one();
        let mut c = T::c(0.25);
        let mut pow = k2;
        let mut sum = T::zero();
        for n in 1..24 {
            let nn = T::from_usize_lossy(n);
            let b = c * (nn + nn) / (T::one() - nn - nn) + c_prev;
            let term = b * pow;
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() {
                break;
            }
            let next = T::from_usize_lossy(2 * n + 1) / T::from_usize_lossy(2 * n + 2);
            c_prev = c;
            c = c * next * next;
            pow = pow * k2;
        }
        T::FRAC_PI_2() * sum
    } else {
        ellipe(k) - (T::one() - k2) * ellipk(k)
    };
    two_over_pi / k * bracket
}

#[derive(Debug, Clone)]
enum KernelSource<T> {
    Cached(SurfaceKernelSamples<T>),
    Direct { structure: PavementStructure<T>, f_top: T, cutoff: T },
}

/// Surface deflection evaluator bound to one structure.
///
/// The kernel is split as `F(m) = F(∞) + R(m)`: the constant part has the
/// closed-form half-space influence, and only `R`, which decays like
/// `e^{-2 m h_top}`, goes through the oscillatory quadrature.
#[derive(Debug, Clone)]
pub struct DeflectionSolver<T> {
    source: KernelSource<T>,
    tol: T,
    budget: usize,
}

impl<T: Real> DeflectionSolver<T> {
    /// Solver backed by the interpolated kernel cache.
    pub fn new(structure: &PavementStructure<T>, tol: T) -> Result<Self> {
        Self::with_grid(structure, tol, KernelGrid::default())
    }

    pub fn with_grid(structure: &PavementStructure<T>, tol: T, grid: KernelGrid) -> Result<Self> {
        check_tolerance(tol)?;
        Ok(Self {
            source: KernelSource::Cached(SurfaceKernelSamples::with_grid(structure, grid)?),
            tol,
            budget: super::hankel::DEFAULT_BUDGET,
        })
    }

    /// Solver over an already sampled kernel.
    pub fn from_samples(samples: SurfaceKernelSamples<T>, tol: T) -> Result<Self> {
        check_tolerance(tol)?;
        Ok(Self {
            source: KernelSource::Cached(samples),
            tol,
            budget: super::hankel::DEFAULT_BUDGET,
        })
    }

    /// Solver that performs a layer solve at every quadrature node.
    pub fn direct(structure: &PavementStructure<T>, tol: T) -> Result<Self> {
        check_tolerance(tol)?;
        let f_top = structure.top().halfspace_kernel();
        let cutoff = match structure.top().thickness.finite() {
            Some(h) => T::c(40.0) / h,
            None => T::zero(),
        };
        Ok(Self {
            source: KernelSource::Direct {
                structure: structure.clone(),
                f_top,
                cutoff,
            },
            tol,
            budget: super::hankel::DEFAULT_BUDGET,
        })
    }

    pub fn tolerance(&self) -> T {
        self.tol
    }

    pub fn kernel_samples(&self) -> Option<&SurfaceKernelSamples<T>> {
        match &self.source {
            KernelSource::Cached(c) => Some(c),
            KernelSource::Direct { .. } => None,
        }
    }

    fn f_top(&self) -> T {
        match &self.source {
            KernelSource::Cached(c) => c.f_top(),
            KernelSource::Direct { f_top, .. } => *f_top,
        }
    }

    /// Integral of the decaying kernel part for radius `a` at offset `r`.
    fn residual_integral(&self, a: T, r: T) -> Result<HankelResult<T>> {
        let opts = HankelOptions {
            tol: self.tol,
            budget: self.budget,
        };
        match &self.source {
            KernelSource::Cached(c) => {
                if c.is_constant() {
                    return Ok(HankelResult {
                        value: T::zero(),
                        evaluations: 0,
                        intervals: 0,
                    });
                }
                hankel_integrate_with(|m| c.residual(m), a, r, opts)
            }
            KernelSource::Direct {
                structure,
                f_top,
                cutoff,
            } => {
                if structure.len() == 1 {
                    return Ok(HankelResult {
                        value: T::zero(),
                        evaluations: 0,
                        intervals: 0,
                    });
                }
                let failure = std::cell::Cell::new(None);
                let res = hankel_integrate_with(
                    |m| {
                        if m >= *cutoff {
                            return T::zero();
                        }
                        match surface_response_kernel(structure, m) {
                            Ok(f) => f - *f_top,
                            Err(_) => {
                                failure.set(Some(m));
                                T::zero()
                            }
                        }
                    },
                    a,
                    r,
                    opts,
                );
                if let Some(m) = failure.get() {
                    return Err(Error::Conditioning {
                        m: m.as_f64(),
                        structure: structure.id(),
                    });
                }
                res
            }
        }
    }

    /// Deflection (m, downward positive) under pressure `p` (Pa) on a disc
    /// of radius `a` (m), at horizontal distance `r` (m) from its center.
    pub fn deflection(&self, p: T, a: T, r: T) -> Result<T> {
        if !(r.is_finite() && r >= T::zero()) {
            return Err(Error::invalid("radial offset", format!("{r} must be finite and non-negative")));
        }
        if !(a.is_finite() && a > T::zero()) {
            return Err(Error::invalid("load radius", format!("{a} must be positive")));
        }
        if p == T::zero() {
            return Ok(T::zero());
        }
        let analytic = self.f_top() * halfspace_influence(a, r);
        let residual = self.residual_integral(a, r)?.value;
        Ok(p * a * (analytic + residual))
    }

    /// Deflection under `load` at surface point `(x, y)`.
    pub fn deflection_at(&self, load: &CircularLoad<T>, x: T, y: T) -> Result<T> {
        self.deflection(load.pressure, load.radius, load.distance_to(x, y))
    }
}

fn check_tolerance<T: Real>(tol: T) -> Result<()> {
    if !(tol >= T::c(1e-12) && tol <= T::c(1e-4)) {
        return Err(Error::invalid("tolerance", format!("{tol} outside [1e-12, 1e-4]")));
    }
    Ok(())
}

/// Surface deflection (m, downward positive) at radial offset `r` from the
/// center of `load`, to relative accuracy `tol`.
///
/// Builds the kernel cache for `structure`; use [`DeflectionSolver`] to
/// amortise it over many evaluations.
pub fn surface_deflection<T: Real>(structure: &PavementStructure<T>, load: &CircularLoad<T>, r: T, tol: T) -> Result<T> {
    DeflectionSolver::new(structure, tol)?.deflection(load.pressure, load.radius, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::{reference_structure, ElasticLayer};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn influence_closed_form_reference() {
        // 20-digit quadrature of ∫ J1(0.15 t) J0(r t)/t dt
        let a = 0.15;
        for (r, want) in [
            (0.0, 1.0),
            (0.05, 0.97161497526946340038),
            (0.15, 0.63661977236758134308),
            (0.3, 0.2586579046113416697),
            (1.5, 0.050062735603230766342),
        ] {
            assert!(rel(halfspace_influence(a, r), want) < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn influence_series_branch_is_continuous() {
        let a = 1.0f64;
        let below = halfspace_influence(a, 3.999_999);
        let above = halfspace_influence(a, 4.000_001);
        assert!(rel(below, above) < 1e-6);
        let far = halfspace_influence(a, 100.0);
        assert!(rel(far, a / 200.0 * (1.0 + 1e-4 / 8.0)) < 1e-8);
    }

    #[test]
    fn boussinesq_center() {
        let s = PavementStructure::halfspace(50e6, 0.35f64).unwrap();
        let load = CircularLoad::new(0.7e6, 0.15).unwrap();
        let w = surface_deflection(&s, &load, 0.0, 1e-8).unwrap();
        let exact = 2.0 * 0.7e6 * 0.15 * (1.0 - 0.35f64.powi(2)) / 50e6;
        assert!(rel(w, exact) < 1e-12);
        assert!((w * 1e3 - 3.6855).abs() < 1e-4);
    }

    #[test]
    fn zero_pressure_gives_zero() {
        let s = reference_structure(100e6f64).unwrap();
        let load = CircularLoad::new(0.0, 0.15).unwrap();
        assert_eq!(surface_deflection(&s, &load, 0.3, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn point_load_far_field() {
        let (e, nu, p, a) = (50e6, 0.35f64, 0.7e6, 0.15);
        let s = PavementStructure::halfspace(e, nu).unwrap();
        let load = CircularLoad::new(p, a).unwrap();
        let r = 10.0 * a;
        let w = surface_deflection(&s, &load, r, 1e-8).unwrap();
        let far = load.force() * (1.0 - nu * nu) / (std::f64::consts::PI * e * r);
        assert!(rel(w, far) < 0.01);
    }

    #[test]
    fn cached_and_direct_kernels_agree() {
        let s = reference_structure(60e6f64).unwrap();
        let cached = DeflectionSolver::new(&s, 1e-9).unwrap();
        let direct = DeflectionSolver::direct(&s, 1e-9).unwrap();
        for r in [0.0, 0.1, 0.5, 2.0, 8.0] {
            let a = cached.deflection(0.92e6, 0.0988, r).unwrap();
            let b = direct.deflection(0.92e6, 0.0988, r).unwrap();
            assert!(rel(a, b) < 1e-8, "r = {r}: {a} vs {b}");
        }
    }

    #[test]
    fn split_and_unsplit_quadrature_agree() {
        use crate::elastic::hankel::hankel_integrate;
        let s = reference_structure(100e6f64).unwrap();
        let solver = DeflectionSolver::new(&s, 1e-10).unwrap();
        let cache = solver.kernel_samples().unwrap();
        for (a, r) in [(0.0988, 0.0), (0.0988, 0.3), (0.15, 1.2)] {
            let split = solver.deflection(1.0, a, r).unwrap() / a;
            let whole = hankel_integrate(|m| cache.eval(m), a, r, 1e-10).unwrap();
            assert!(rel(split, whole) < 1e-7, "a = {a}, r = {r}: {split} vs {whole}");
        }
    }

    #[test]
    fn stiff_overlay_reduces_deflection() {
        let soft = PavementStructure::halfspace(50e6, 0.35f64).unwrap();
        let layered = PavementStructure::new(vec![
            ElasticLayer::finite(0.2, 5000e6, 0.35),
            ElasticLayer::semi_infinite(50e6, 0.35),
        ])
        .unwrap();
        let load = CircularLoad::new(0.7e6, 0.15).unwrap();
        let w_soft = surface_deflection(&soft, &load, 0.0, 1e-8).unwrap();
        let w_layered = surface_deflection(&layered, &load, 0.0, 1e-8).unwrap();
        assert!(w_layered < w_soft);
        assert!(w_layered > 0.0);
    }

    #[test]
    fn scaled_samples_match_scaled_moduli() {
        let s = reference_structure(50e6).unwrap();
        let samples = SurfaceKernelSamples::build(&s).unwrap();
        let a = DeflectionSolver::from_samples(samples.scaled(0.5), 1e-10).unwrap();
        let b = DeflectionSolver::new(&s.scaled_moduli(2.0).unwrap(), 1e-10).unwrap();
        for r in [0.0, 0.4, 2.0] {
            let (wa, wb) = (a.deflection(0.9e6, 0.1, r).unwrap(), b.deflection(0.9e6, 0.1, r).unwrap());
            assert!(rel(wa, wb) < 1e-10, "{wa} vs {wb}");
        }
    }

    #[test]
    fn tolerance_range_enforced() {
        let s = reference_structure(100e6f64).unwrap();
        assert!(DeflectionSolver::new(&s, 1e-3).is_err());
        assert!(DeflectionSolver::new(&s, 1e-13).is_err());
    }

    #[test]
    fn single_precision_boussinesq() {
        let s = PavementStructure::halfspace(50e6f32, 0.35).unwrap();
        let load = CircularLoad::new(0.7e6f32, 0.15).unwrap();
        let w = surface_deflection(&s, &load, 0.0, 1e-4).unwrap();
        let exact = 2.0 * 0.7e6 * 0.15 * (1.0 - 0.35f32 * 0.35) / 50e6;
        assert!((w - exact).abs() / exact < 1e-5);
    }
}
