//! Subgrade modulus backcalculation from corrected sensor slopes.
//!
//! The objective is the weighted least-squares misfit between observed and
//! simulated Sn1..Sn7 as a function of the swept layer modulus.

mod io;
mod minimize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SlopeDatabase;
use crate::elastic::{reference_structure, PavementStructure, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::tsd::{TsdConfiguration, TsdSimulator, SENSOR_COUNT};

pub use io::{read_readings, write_results, Reading, READINGS_HEADER, RESULTS_HEADER};
pub use minimize::{minimize_bounded, Minimum};

/// Sensor slopes Sn1..Sn7 in µm/m.
pub type Slopes = [f64; SENSOR_COUNT];

/// Requested accuracy of the bracketed estimate, MPa.
pub const MODULUS_XTOL: f64 = 1e-3;
/// Distance from a bound (MPa) within which an estimate is flagged.
pub const AT_BOUND_MPA: f64 = 1e-2;
const MAX_ITERATIONS: usize = 200;
const COARSE_POINTS: usize = 25;
const FALLBACK_STEP_MPA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "bracketed-minimization")]
    Bracketed,
    #[serde(rename = "grid-scan")]
    GridScan,
    #[serde(rename = "lookup")]
    Lookup,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bracketed => "bracketed-minimization",
            Method::GridScan => "grid-scan",
            Method::Lookup => "lookup",
        }
    }
}

/// Simulated Sn1..Sn7 as a function of one layer modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub base: PavementStructure<f64>,
    /// 0-based index of the layer whose modulus is estimated.
    pub layer: usize,
    pub tsd: TsdConfiguration<f64>,
    pub tolerance: f64,
}

impl Default for ForwardModel {
    fn default() -> Self {
        let base = reference_structure(100e6).expect("reference structure is valid");
        Self {
            layer: base.len() - 1,
            base,
            tsd: TsdConfiguration::default(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl ForwardModel {
    pub fn reading(&self, modulus_mpa: f64) -> Result<Slopes> {
        let s = self.base.with_modulus(self.layer, modulus_mpa * 1e6)?;
        let sim = TsdSimulator::new(&s, &self.tsd, self.tolerance)?;
        Ok(sim.sensor_reading()?.slopes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseProblem {
    pub observed: Slopes,
    pub model: ForwardModel,
    /// MPa.
    pub bounds: (f64, f64),
    pub weights: Slopes,
}

impl InverseProblem {
    pub fn new(observed: Slopes) -> Self {
        Self {
            observed,
            model: ForwardModel::default(),
            bounds: (16.0, 250.0),
            weights: [1.0; SENSOR_COUNT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(Error::invalid("bounds", format!("[{lo}, {hi}] must be positive and ordered")));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "weights must be finite and non-negative"));
        }
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::invalid("weights", "at least one weight must be positive"));
        }
        if self.observed.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observed reading", "slopes must be finite"));
        }
        Ok(())
    }

    fn misfit(&self, model: &Slopes) -> f64 {
        weighted_misfit(&self.weights, model, &self.observed)
    }
}

fn weighted_misfit(weights: &Slopes, model: &Slopes, observed: &Slopes) -> f64 {
    weights
        .iter()
        .zip(model.iter().zip(observed))
        .map(|(w, (m, o))| w * (m - o) * (m - o))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSolution {
    /// MPa.
    pub modulus_mpa: f64,
    /// Square root of the weighted sum of squared misfits, µm/m.
    pub residual_norm: f64,
    /// Objective evaluations (forward runs or database rows).
    pub iterations: usize,
    pub method: Method,
    pub at_bound: bool,
    /// Model minus observed, per sensor, µm/m.
    pub sensor_residuals: Slopes,
    pub warnings: Vec<String>,
}

/// Weighted squared misfit `Σ wᵢ (modelᵢ(E) − observedᵢ)²` at modulus `E`.
pub fn residual(problem: &InverseProblem, modulus_mpa: f64) -> Result<f64> {
    problem.validate()?;
    let (lo, hi) = problem.bounds;
    if !(modulus_mpa >= lo && modulus_mpa <= hi) {
        return Err(Error::invalid("modulus", format!("{modulus_mpa} MPa outside bounds [{lo}, {hi}]")));
    }
    Ok(problem.misfit(&problem.model.reading(modulus_mpa)?))
}

/// Indices of the strict local minima of a sampled sequence, ends
/// included.
fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] < values[i - 1];
            let right = i + 1 == n || values[i] < values[i + 1];
            left && right
        })
        .collect()
}

/// Bracketed minimisation of the residual over the bounds.
///
/// A coarse scan checks that the residual has a single local minimum; if
/// not, a 1 MPa grid scan picks the best cell and the minimiser refines
/// inside it.
pub fn backcalculate(problem: &InverseProblem) -> Result<InverseSolution> {
    problem.validate()?;
    let (lo, hi) = problem.bounds;
    let evals = std::cell::Cell::new(0usize);
    let objective = |e: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        Ok(problem.misfit(&problem.model.reading(e)?))
    };

    let coarse = grid(lo, hi, (hi - lo) / (COARSE_POINTS - 1) as f64);
    let values = coarse.iter().map(|&e| objective(e)).collect::<Result<Vec<_>>>()?;
    let minima = local_minima(&values);
    let mut warnings = Vec::new();
    let (method, xs, fs) = if minima.len() == 1 {
        (Method::Bracketed, coarse, values)
    } else {
        warnings.push(format!(
            "residual has {} local minima on the coarse scan; using a {FALLBACK_STEP_MPA} MPa grid scan",
            minima.len()
        ));
        let fine = grid(lo, hi, FALLBACK_STEP_MPA);
        let fv = fine.iter().map(|&e| objective(e)).collect::<Result<Vec<_>>>()?;
        (Method::GridScan, fine, fv)
    };
    let best = (0..fs.len()).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).expect("non-empty grid");
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(xs.len() - 1)];

    let failure = std::cell::RefCell::new(None);
    let min = minimize_bounded(
        |e| match objective(e) {
            Ok(v) => v,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                f64::INFINITY
            }
        },
        a,
        b,
        MODULUS_XTOL,
        MAX_ITERATIONS,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    if !min.converged {
        warnings.push(format!("minimiser stopped after {MAX_ITERATIONS} iterations"));
    }
    let (mut estimate, mut fmin) = (min.x, min.value);
    // the bracket interior never reaches a bound exactly
    for (x, f) in [(xs[0], fs[0]), (xs[xs.len() - 1], fs[fs.len() - 1])] {
        if f <= fmin {
            estimate = x;
            fmin = f;
        }
    }
    finish(problem, estimate, evals.get(), method, warnings)
}

fn finish(
    problem: &InverseProblem,
    estimate: f64,
    iterations: usize,
    method: Method,
    mut warnings: Vec<String>,
) -> Result<InverseSolution> {
    let (lo, hi) = problem.bounds;
    let model = problem.model.reading(estimate)?;
    let mut sensor_residuals = [0.0; SENSOR_COUNT];
    for (k, r) in sensor_residuals.iter_mut().enumerate() {
        *r = model[k] - problem.observed[k];
    }
    let at_bound = estimate - lo <= AT_BOUND_MPA || hi - estimate <= AT_BOUND_MPA;
    if at_bound {
        warnings.push(format!("estimate {estimate} MPa is at the search bound"));
    }
    Ok(InverseSolution {
        modulus_mpa: estimate,
        residual_norm: problem.misfit(&model).sqrt(),
        iterations: iterations + 1,
        method,
        at_bound,
        sensor_residuals,
        warnings,
    })
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - out[n] > 1e-9 * step {
        out.push(hi);
    } else {
        out[n] = hi;
    }
    out
}

/// Backcalculates every problem in parallel, preserving order.
pub fn backcalculate_batch(problems: &[InverseProblem]) -> Vec<Result<InverseSolution>> {
    problems.par_iter().map(backcalculate).collect()
}

/// Nearest database row by weighted squared distance, refined by the
/// vertex of the parabola through the three nearest moduli.
pub fn backcalculate_lookup(reading: &Slopes, db: &SlopeDatabase, weights: &Slopes) -> Result<InverseSolution> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if !weights.iter().any(|&w| w > 0.0) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights", "weights must be non-negative with at least one positive"));
    }
    let d: Vec<f64> = db.rows.iter().map(|r| weighted_misfit(weights, &r.slopes, reading)).collect();
    let n = d.len();
    let best = (0..n).min_by(|&a, &b| d[a].total_cmp(&d[b])).expect("non-empty");
    let lo = db.rows[0].modulus_mpa;
    let hi = db.rows[n - 1].modulus_mpa;
    let mut warnings = Vec::new();

    let estimate = if d[best] == 0.0 || n < 3 {
        db.rows[best].modulus_mpa
    } else {
        let c = best.clamp(1, n - 2);
        let (x0, x1, x2) = (db.rows[c - 1].modulus_mpa, db.rows[c].modulus_mpa, db.rows[c + 1].modulus_mpa);
        let (f0, f1, f2) = (d[c - 1], d[c], d[c + 1]);
        match parabola_vertex((x0, f0), (x1, f1), (x2, f2)) {
            Some(v) if v < lo || v > hi => {
                warnings.push(format!(
                    "reading lies outside the database envelope; estimate clamped to {} MPa",
                    if v < lo { lo } else { hi }
                ));
                v.clamp(lo, hi)
            }
            Some(v) => v.clamp(x0, x2),
            None => db.rows[best].modulus_mpa,
        }
    };

    // residuals against the linearly interpolated row
    let model = interpolate_row(db, estimate);
    let mut sensor_residuals = [0.0; SENSOR_COUNT];
    for (k, r) in sensor_residuals.iter_mut().enumerate() {
        *r = model[k] - reading[k];
    }
    let at_bound = estimate - lo <= AT_BOUND_MPA || hi - estimate <= AT_BOUND_MPA;
    if at_bound && warnings.is_empty() {
        warnings.push(format!("estimate {estimate} MPa is at the database bound"));
    }
    Ok(InverseSolution {
        modulus_mpa: estimate,
        residual_norm: weighted_misfit(weights, &model, reading).sqrt(),
        iterations: n,
        method: Method::Lookup,
        at_bound,
        sensor_residuals,
        warnings,
    })
}

fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let (x0, f0) = p0;
    let (x1, f1) = p1;
    let (x2, f2) = p2;
    let d01 = (f1 - f0) / (x1 - x0);
    let d12 = (f2 - f1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !(curvature > 0.0) {
        return None;
    }
    // f = f0 + d01 (x - x0) + curvature (x - x0)(x - x1)
    Some(0.5 * (x0 + x1) - d01 / (2.0 * curvature))
}

fn interpolate_row(db: &SlopeDatabase, e: f64) -> Slopes {
    let rows = &db.rows;
    let j = rows.partition_point(|r| r.modulus_mpa < e);
    if j == 0 {
        return rows[0].slopes;
    }
    if j == rows.len() {
        return rows[rows.len() - 1].slopes;
    }
    let (a, b) = (&rows[j - 1], &rows[j]);
    let t = (e - a.modulus_mpa) / (b.modulus_mpa - a.modulus_mpa);
    std::array::from_fn(|k| a.slopes[k] + t * (b.slopes[k] - a.slopes[k]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub modulus_mpa: f64,
    pub slopes: Slopes,
    /// `∂Snᵢ/∂E`, µm/m per MPa.
    pub derivatives: Slopes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub step_mpa: f64,
    pub rows: Vec<SensitivityRow>,
    /// `max − min` of each sensor over the listed moduli, µm/m.
    pub spread: Slopes,
    /// Spread divided by the mean absolute slope.
    pub relative_spread: Slopes,
}

impl SensitivityReport {
    /// Whether the relative spread grows from Sn1 to Sn7.
    pub fn outer_sensors_spread_more(&self) -> bool {
        self.relative_spread[SENSOR_COUNT - 1] > self.relative_spread[0]
    }
}

pub const SENSITIVITY_STEP_MPA: f64 = 0.5;

/// Central-difference sensitivities of an arbitrary forward map.
pub fn sensitivity_table(
    forward: impl Fn(f64) -> Result<Slopes> + Sync,
    moduli_mpa: &[f64],
    step_mpa: f64,
) -> Result<SensitivityReport> {
    if !(step_mpa.is_finite() && step_mpa > 0.0) {
        return Err(Error::invalid("sensitivity step", format!("{step_mpa} must be positive")));
    }
    let rows = moduli_mpa
        .par_iter()
        .map(|&e| {
            let (up, down, at) = (forward(e + step_mpa)?, forward(e - step_mpa)?, forward(e)?);
            Ok(SensitivityRow {
                modulus_mpa: e,
                slopes: at,
                derivatives: std::array::from_fn(|k| (up[k] - down[k]) / (2.0 * step_mpa)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spread = [0.0; SENSOR_COUNT];
    let mut relative_spread = [0.0; SENSOR_COUNT];
    for k in 0..SENSOR_COUNT {
        let col = rows.iter().map(|r| r.slopes[k]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = col.clone().fold(f64::INFINITY, f64::min);
        let mean_abs = col.map(f64::abs).sum::<f64>() / rows.len().max(1) as f64;
        spread[k] = max - min;
        relative_spread[k] = if mean_abs > 0.0 { spread[k] / mean_abs } else { 0.0 };
    }
    Ok(SensitivityReport {
        step_mpa,
        rows,
        spread,
        relative_spread,
    })
}

/// Sensitivities of the TSD forward model at each modulus.
pub fn sensitivity_report(model: &ForwardModel, moduli_mpa: &[f64]) -> Result<SensitivityReport> {
    sensitivity_table(|e| model.reading(e), moduli_mpa, SENSITIVITY_STEP_MPA)
}
