//! Analytic oracle suite behind `tsdsim validate`.

use tsdsim::elastic::{
    reference_structure, surface_response_kernel, DeflectionSolver, ElasticLayer, PavementStructure,
    SurfaceKernelSamples,
};
use tsdsim::scalar::rel_diff;
use tsdsim::Result;

pub struct OracleResult {
    pub name: &'static str,
    pub error: f64,
    pub bound: f64,
}

impl OracleResult {
    pub fn passed(&self) -> bool {
        self.error <= self.bound
    }
}

/// Runs every oracle at quadrature tolerance `tol`. `kernel_scale` other
/// than 1 corrupts the layered kernel and must make the suite fail.
pub fn run_suite(tol: f64, kernel_scale: f64) -> Result<Vec<OracleResult>> {
    let solver = |s: &PavementStructure<f64>| -> Result<DeflectionSolver<f64>> {
        let samples = SurfaceKernelSamples::build(s)?;
        let samples = if kernel_scale == 1.0 { samples } else { samples.scaled(kernel_scale) };
        DeflectionSolver::from_samples(samples, tol)
    };
    let kernel = |s: &PavementStructure<f64>, m: f64| surface_response_kernel(s, m).map(|f| f * kernel_scale);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for (e, nu, p, a) in [
        (50e6, 0.35, 0.7e6, 0.15),
        (7000e6, 0.2, 1.0e6, 0.1),
        (12e6, 0.45, 0.2e6, 0.3),
        (300e6, 0.3, 0.92e6, 0.0988),
    ] {
        let w = solver(&PavementStructure::halfspace(e, nu)?)?.deflection(p, a, 0.0)?;
        worst = worst.max(rel_diff(w, 2.0 * p * a * (1.0 - nu * nu) / e));
    }
    out.push(OracleResult {
        name: "boussinesq",
        error: worst,
        bound: 1e-9,
    });

    let (mut top, mut bottom) = (0.0f64, 0.0f64);
    for e_sub in [16e6, 100e6, 250e6] {
        let s = reference_structure(e_sub)?;
        top = top.max(rel_diff(kernel(&s, 1e4)?, s.top().halfspace_kernel()));
        bottom = bottom.max(rel_diff(kernel(&s, 1e-9)?, s.subgrade().halfspace_kernel()));
    }
    out.push(OracleResult {
        name: "kernel-short-wave",
        error: top,
        bound: 1e-6,
    });
    out.push(OracleResult {
        name: "kernel-long-wave",
        error: bottom,
        bound: 1e-6,
    });

    let mut worst = 0.0f64;
    for e_sub in [16e6, 250e6] {
        let table = reference_structure(e_sub)?;
        let merged = PavementStructure::new(vec![
            ElasticLayer::finite(0.06, 7000e6, 0.35),
            ElasticLayer::finite(0.18, 9300e6, 0.35),
            ElasticLayer::semi_infinite(e_sub, 0.35),
        ])?;
        let (a, b) = (solver(&table)?, solver(&merged)?);
        for r in [0.0, 0.3, 1.0, 3.8] {
            worst = worst.max(rel_diff(a.deflection(0.92e6, 0.0988, r)?, b.deflection(0.92e6, 0.0988, r)?));
        }
    }
    out.push(OracleResult {
        name: "layer-merge",
        error: worst,
        bound: 1e-9f64.max(tol),
    });

    let base = reference_structure(100e6)?;
    let k = 2.5;
    let (a, b) = (solver(&base)?, solver(&base.scaled_moduli(k)?)?);
    let mut worst = 0.0f64;
    for r in [0.0, 0.3, 1.0, 3.8] {
        worst = worst.max(rel_diff(a.deflection(0.92e6, 0.0988, r)? / k, b.deflection(0.92e6, 0.0988, r)?));
    }
    out.push(OracleResult {
        name: "homogeneity",
        error: worst,
        bound: 1e-9f64.max(2.0 * tol),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_correct_kernel() {
        for tol in [1e-8, 1e-12] {
            let results = run_suite(tol, 1.0).unwrap();
            for r in &results {
                assert!(r.passed(), "tol {tol}: {} error {:e}", r.name, r.error);
            }
        }
    }

    #[test]
    fn corrupted_kernel_fails() {
        let results = run_suite(1e-8, 1.001).unwrap();
        assert!(results.iter().any(|r| !r.passed()));
    }
}
