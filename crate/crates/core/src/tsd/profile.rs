use serde::{Deserialize, Serialize};

use super::{TsdConfiguration, SENSOR_COUNT};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Surface deflection sampled along the measurement line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionProfile<T> {
    /// m.
    pub offsets: Vec<T>,
    /// µm, downward positive.
    pub deflections: Vec<T>,
    pub structure_id: String,
    pub config_hash: String,
}

/// Slope of a deflection profile with respect to `x`, µm/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile<T> {
    pub offsets: Vec<T>,
    pub slopes: Vec<T>,
    pub corrected: bool,
    /// Raw slope at the reference offset, subtracted when corrected.
    pub reference_value: Option<T>,
    pub structure_id: String,
}

/// Corrected slopes at Sn1..Sn7 plus the raw Sn8 slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading<T> {
    /// µm/m.
    pub slopes: [T; SENSOR_COUNT],
    /// Raw slope at the reference sensor before zeroing, µm/m.
    pub sn8_raw: T,
    pub structure_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinIndices<T> {
    /// Surface curvature index `w(0) - w(0.3)`, µm.
    pub sci: T,
    /// Base damage index `w(0.3) - w(0.6)`, µm.
    pub bdi: T,
}

/// Second-order slope at node `i` of an `n`-node grid with spacing `h`.
pub(crate) fn stencil_slope<T: Real>(w: impl Fn(usize) -> T, i: usize, n: usize, h: T) -> T {
    let two_h = h + h;
    if i == 0 {
        (T::c(-3.0) * w(0) + T::c(4.0) * w(1) - w(2)) / two_h
    } else if i == n - 1 {
        (T::c(3.0) * w(n - 1) - T::c(4.0) * w(n - 2) + w(n - 3)) / two_h
    } else {
        (w(i + 1) - w(i - 1)) / two_h
    }
}

/// Grid nodes the stencil at `i` reads.
pub(crate) fn stencil_nodes(i: usize, n: usize) -> Vec<usize> {
    if i == 0 {
        vec![0, 1, 2]
    } else if i == n - 1 {
        vec![n - 3, n - 2, n - 1]
    } else {
        vec![i - 1, i + 1]
    }
}

/// Spacing of a uniform grid, or an error if the grid is not uniform.
fn uniform_spacing<T: Real>(offsets: &[T]) -> Result<T> {
    let n = offsets.len();
    if n < 3 {
        return Err(Error::Grid(format!("at least 3 samples are required, got {n}")));
    }
    let h = (offsets[n - 1] - offsets[0]) / T::from_usize_lossy(n - 1);
    if !(h > T::zero()) {
        return Err(Error::Grid("offsets must be increasing".into()));
    }
    for (i, pair) in offsets.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if (d - h).abs() > T::c(1e-6) * h {
            return Err(Error::Grid(format!(
                "non-uniform spacing between samples {i} and {}: {d} vs {h}",
                i + 1
            )));
        }
    }
    Ok(h)
}

/// Index of the sample at `x`, without interpolation.
fn node_index<T: Real>(offsets: &[T], x: T) -> Option<usize> {
    let n = offsets.len();
    if n < 2 {
        return offsets.iter().position(|&o| o == x);
    }
    let h = (offsets[n - 1] - offsets[0]) / T::from_usize_lossy(n - 1);
    let k = ((x - offsets[0]) / h).round();
    if !(k >= T::zero()) {
        return None;
    }
    let i = k.to_usize()?;
    (i < n && (offsets[i] - x).abs() <= T::c(1e-9) * h).then_some(i)
}

/// Central differences inside, second-order one-sided differences at the
/// two ends.
pub fn differentiate<T: Real>(profile: &DeflectionProfile<T>) -> Result<SlopeProfile<T>> {
    if profile.offsets.len() != profile.deflections.len() {
        return Err(Error::Grid("offset and deflection counts differ".into()));
    }
    let h = uniform_spacing(&profile.offsets)?;
    let w = &profile.deflections;
    let n = w.len();
    let slopes = (0..n).map(|i| stencil_slope(|j| w[j], i, n, h)).collect();
    Ok(SlopeProfile {
        offsets: profile.offsets.clone(),
        slopes,
        corrected: false,
        reference_value: None,
        structure_id: profile.structure_id.clone(),
    })
}

/// Shifts every slope so the value at `reference_offset` is exactly zero.
///
/// The raw reference value of the first correction is kept; applying the
/// correction again is a no-op.
pub fn apply_reference_correction<T: Real>(slope: &SlopeProfile<T>, reference_offset: T) -> Result<SlopeProfile<T>> {
    let i = node_index(&slope.offsets, reference_offset)
        .ok_or_else(|| Error::Grid(format!("reference offset {reference_offset} m is not a profile sample")))?;
    let shift = slope.slopes[i];
    let mut out = slope.clone();
    for s in &mut out.slopes {
        *s = *s - shift;
    }
    out.corrected = true;
    out.reference_value = Some(match slope.reference_value {
        Some(raw) if slope.corrected => raw + shift,
        _ => shift,
    });
    Ok(out)
}

/// Exact grid lookups of the corrected slope at the configured sensors.
pub fn sample_sensors<T: Real>(slope: &SlopeProfile<T>, tsd: &TsdConfiguration<T>) -> Result<SensorReading<T>> {
    if !slope.corrected {
        return Err(Error::invalid("slope profile", "sensor sampling requires a reference-corrected profile"));
    }
    if tsd.sensor_offsets.len() != SENSOR_COUNT {
        return Err(Error::invalid(
            "sensor_offsets",
            format!("expected {SENSOR_COUNT} offsets, got {}", tsd.sensor_offsets.len()),
        ));
    }
    let mut slopes = [T::zero(); SENSOR_COUNT];
    for (k, &s) in tsd.sensor_offsets.iter().enumerate() {
        let i = node_index(&slope.offsets, s)
            .ok_or_else(|| Error::Grid(format!("sensor Sn{} at {s} m is not a profile sample", k + 1)))?;
        slopes[k] = slope.slopes[i];
    }
    Ok(SensorReading {
        slopes,
        sn8_raw: slope.reference_value.unwrap_or_else(T::zero),
        structure_id: slope.structure_id.clone(),
    })
}

/// SCI and BDI with the basin origin at `x = 0`.
pub fn basin_indices<T: Real>(profile: &DeflectionProfile<T>) -> Result<BasinIndices<T>> {
    basin_indices_at(profile, T::zero())
}

pub fn basin_indices_at<T: Real>(profile: &DeflectionProfile<T>, origin: T) -> Result<BasinIndices<T>> {
    let at = |dx: f64| -> Result<T> {
        let x = origin + T::c(dx);
        node_index(&profile.offsets, x)
            .map(|i| profile.deflections[i])
            .ok_or_else(|| Error::Grid(format!("basin index needs a sample at {x} m")))
    };
    let (w0, w3, w6) = (at(0.0)?, at(0.3)?, at(0.6)?);
    Ok(BasinIndices {
        sci: w0 - w3,
        bdi: w3 - w6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsd::ProfileGrid;

    fn synthetic(step: f64, n: usize, f: impl Fn(f64) -> f64) -> DeflectionProfile<f64> {
        let offsets: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        DeflectionProfile {
            deflections: offsets.iter().map(|&x| f(x)).collect(),
            offsets,
            structure_id: "synthetic".into(),
            config_hash: String::new(),
        }
    }

    #[test]
    fn constant_profile_has_zero_slope() {
        let s = differentiate(&synthetic(0.01, 50, |_| 7.5)).unwrap();
        assert!(s.slopes.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_profile_slope_is_exact() {
        let s = differentiate(&synthetic(0.25, 20, |x| 3.0 * x)).unwrap();
        assert!(s.slopes.iter().all(|&v| v == 3.0), "{:?}", s.slopes);
    }

    #[test]
    fn quadratic_profile_endpoints_are_exact() {
        // second-order one-sided stencils are exact on quadratics
        let s = differentiate(&synthetic(0.5, 9, |x| x * x - 2.0 * x)).unwrap();
        assert_eq!(s.slopes[0], -2.0);
        assert_eq!(s.slopes[8], 2.0 * 4.0 - 2.0);
    }

    #[test]
    fn exponential_profile_within_truncation_bound() {
        let h = 0.01;
        let p = synthetic(h, 401, |x| (-x).exp());
        let s = differentiate(&p).unwrap();
        for i in 1..400 {
            let x = p.offsets[i];
            let exact = -(-x).exp();
            // h²/6 · max|w'''| over the stencil
            let bound = h * h / 6.0 * (-(x - h)).exp();
            assert!((s.slopes[i] - exact).abs() <= bound, "x = {x}");
        }
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let mut p = synthetic(0.1, 10, |x| x);
        p.offsets[4] += 0.01;
        assert!(matches!(differentiate(&p), Err(Error::Grid(_))));
        assert!(differentiate(&synthetic(0.1, 2, |x| x)).is_err());
    }

    #[test]
    fn correction_zeroes_reference_and_is_idempotent() {
        let g = ProfileGrid::new(0.0, 4.0, 0.01).unwrap();
        let offsets = g.offsets();
        let p = DeflectionProfile {
            deflections: offsets.iter().map(|&x| 100.0 / (1.0 + x * x)).collect(),
            offsets,
            structure_id: "s".into(),
            config_hash: String::new(),
        };
        let raw = differentiate(&p).unwrap();
        let once = apply_reference_correction(&raw, 3.8).unwrap();
        assert_eq!(once.slopes[380], 0.0);
        assert_eq!(once.reference_value, Some(raw.slopes[380]));
        let twice = apply_reference_correction(&once, 3.8).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn correction_with_zero_reference_is_identity() {
        let mut s = differentiate(&synthetic(0.1, 41, |x| (x - 3.8).powi(2))).unwrap();
        s.slopes[38] = 0.0;
        let c = apply_reference_correction(&s, 3.8).unwrap();
        assert_eq!(c.slopes, s.slopes);
    }

    #[test]
    fn correction_rejects_off_grid_reference() {
        let s = differentiate(&synthetic(0.01, 401, |x| x)).unwrap();
        assert!(matches!(apply_reference_correction(&s, 3.805), Err(Error::Grid(_))));
    }

    #[test]
    fn sensors_are_exact_lookups() {
        let tsd = TsdConfiguration::<f64>::default();
        let g = tsd.grid().unwrap();
        let slope = SlopeProfile {
            offsets: g.offsets(),
            slopes: (0..401).map(|i| i as f64).collect(),
            corrected: true,
            reference_value: Some(-4.0),
            structure_id: "s".into(),
        };
        let r = sample_sensors(&slope, &tsd).unwrap();
        assert_eq!(r.slopes, [10.0, 20.0, 30.0, 45.0, 60.0, 90.0, 110.0]);
        assert_eq!(r.sn8_raw, -4.0);

        let zero = SlopeProfile {
            slopes: vec![0.0; 401],
            ..slope.clone()
        };
        assert_eq!(sample_sensors(&zero, &tsd).unwrap().slopes, [0.0; 7]);

        let raw = SlopeProfile {
            corrected: false,
            ..slope
        };
        assert!(sample_sensors(&raw, &tsd).is_err());
    }

    #[test]
    fn basin_indices_on_synthetic_profiles() {
        let g = ProfileGrid::new(0.0, 4.0, 0.01).unwrap();
        let flat = DeflectionProfile {
            offsets: g.offsets(),
            deflections: vec![5.0; 401],
            structure_id: String::new(),
            config_hash: String::new(),
        };
        let b = basin_indices(&flat).unwrap();
        assert_eq!((b.sci, b.bdi), (0.0, 0.0));

        let falling = DeflectionProfile {
            deflections: flat.offsets.iter().map(|&x| 400.0 - 50.0 * x).collect(),
            ..flat.clone()
        };
        let b = basin_indices(&falling).unwrap();
        assert!(b.sci > 0.0 && b.bdi > 0.0);

        assert!(basin_indices_at(&flat, 3.6).is_err());
    }
}
