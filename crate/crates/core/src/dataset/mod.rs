//! Subgrade modulus sweeps over the reference structure and the slope
//! database / deflection matrix they produce.

pub(crate) mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elastic::{reference_structure, PavementStructure, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::tsd::{ContactMode, PipelineOutput, TsdConfiguration, TsdSimulator, SENSOR_COUNT};

pub use io::{read_database, read_matrix, write_database, write_matrix, SLOPE_HEADER};

const PA_PER_MPA: f64 = 1e6;

pub const TOOL_VERSION: &str = concat!("tsdsim ", env!("CARGO_PKG_VERSION"));

/// Which layer to sweep and over which moduli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: PavementStructure<f64>,
    /// 0-based layer index.
    pub layer: usize,
    /// MPa, strictly increasing.
    pub values_mpa: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::subgrade((16..=250).map(f64::from).collect())
    }
}

impl SweepSpec {
    /// Subgrade sweep over `values_mpa` on the reference structure.
    pub fn subgrade(values_mpa: Vec<f64>) -> Self {
        let base = reference_structure(100.0 * PA_PER_MPA).expect("reference structure is valid");
        Self {
            layer: base.len() - 1,
            base,
            values_mpa,
        }
    }

    /// `lo, lo + step, …` up to and including `hi` (within rounding).
    pub fn range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
            return Err(Error::invalid("sweep", format!("{lo}:{hi}:{step} is not an increasing range")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + i as f64 * step).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer >= self.base.len() {
            return Err(Error::invalid(
                "sweep layer",
                format!("{} out of range for a {}-layer structure", self.layer, self.base.len()),
            ));
        }
        if self.values_mpa.is_empty() {
            return Err(Error::invalid("sweep values", "at least one modulus is required"));
        }
        for &v in &self.values_mpa {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("sweep values", format!("modulus {v} MPa must be positive")));
            }
        }
        if let Some(w) = self.values_mpa.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "sweep values",
                format!("moduli must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        Ok(())
    }
}

/// One structure per sweep value, differing only in the swept layer.
pub fn sweep_modulus(spec: &SweepSpec) -> Result<Vec<PavementStructure<f64>>> {
    spec.validate()?;
    spec.values_mpa
        .iter()
        .map(|&v| spec.base.with_modulus(spec.layer, v * PA_PER_MPA))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub modulus_mpa: f64,
    /// Corrected Sn1..Sn7, µm/m.
    pub slopes: [f64; SENSOR_COUNT],
    /// Raw Sn8 before zeroing, µm/m.
    pub sn8_raw: f64,
}

/// First place a sensor column stops being strictly monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub column: String,
    pub modulus_mpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config_hash: String,
    pub base_structure: String,
    pub swept_layer: usize,
    pub quadrature_tol: f64,
    pub contact_mode: ContactMode,
    pub gravity: f64,
    pub non_monotone: Vec<MonotonicityViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeDatabase {
    pub manifest: Manifest,
    pub rows: Vec<SlopeRow>,
}

impl SlopeDatabase {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.modulus_mpa).collect()
    }

    /// Corrected slopes of sensor `k` (0-based).
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.slopes[k]).collect()
    }
}

/// Deflection profiles of a sweep, one column per modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionMatrix {
    /// m.
    pub offsets: Vec<f64>,
    pub moduli_mpa: Vec<f64>,
    /// µm, `columns[j][i]` at `offsets[i]` for `moduli_mpa[j]`.
    pub columns: Vec<Vec<f64>>,
}

impl DeflectionMatrix {
    /// Column label for a modulus: zero-padded MPa, e.g. `E016`.
    pub fn label(modulus_mpa: f64) -> String {
        if modulus_mpa.fract() == 0.0 && modulus_mpa < 1e15 {
            format!("E{:03}", modulus_mpa as u64)
        } else {
            format!("E{modulus_mpa}")
        }
    }
}

/// What to do when a sensor column is not strictly monotone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotonicityGate {
    /// Fail with [`Error::NonMonotone`].
    #[default]
    Enforce,
    /// Keep the data and list the violations in the manifest.
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub tolerance: f64,
    pub gate: MonotonicityGate,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            gate: MonotonicityGate::Enforce,
        }
    }
}

/// Strict-monotonicity scan of the corrected sensor columns.
pub fn check_monotone(rows: &[SlopeRow]) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for k in 0..SENSOR_COUNT {
        let mut direction = 0.0;
        for pair in rows.windows(2) {
            let d = (pair[1].slopes[k] - pair[0].slopes[k]).signum();
            let flat = pair[1].slopes[k] == pair[0].slopes[k];
            if direction == 0.0 && !flat {
                direction = d;
                continue;
            }
            if flat || d != direction {
                out.push(MonotonicityViolation {
                    column: format!("Sn{}", k + 1),
                    modulus_mpa: pair[1].modulus_mpa,
                });
                break;
            }
        }
    }
    out
}

fn config_hash(spec: &SweepSpec, tsd: &TsdConfiguration<f64>, tol: f64) -> String {
    let mut h = Sha256::new();
    h.update(tsd.hash().as_bytes());
    h.update(spec.base.id().as_bytes());
    h.update((spec.layer as u64).to_le_bytes());
    for v in &spec.values_mpa {
        h.update(v.to_le_bytes());
    }
    h.update(tol.to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Runs the TSD pipeline for every sweep value (in parallel) and assembles
/// the database in modulus order. Fails if any column is not strictly
/// monotone.
pub fn generate_database(spec: &SweepSpec, tsd: &TsdConfiguration<f64>) -> Result<(SlopeDatabase, DeflectionMatrix)> {
    generate_database_with(spec, tsd, GenerateOptions::default())
}

pub fn generate_database_with(
    spec: &SweepSpec,
    tsd: &TsdConfiguration<f64>,
    opts: GenerateOptions,
) -> Result<(SlopeDatabase, DeflectionMatrix)> {
    let structures = sweep_modulus(spec)?;
    tsd.validate()?;
    let outputs: Vec<PipelineOutput<f64>> = structures
        .par_iter()
        .zip(&spec.values_mpa)
        .map(|(s, &v)| {
            TsdSimulator::new(s, tsd, opts.tolerance)
                .and_then(|sim| sim.run())
                .map_err(|e| Error::Sweep {
                    modulus_mpa: v,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<SlopeRow> = outputs
        .iter()
        .zip(&spec.values_mpa)
        .map(|(o, &v)| SlopeRow {
            modulus_mpa: v,
            slopes: o.reading.slopes,
            sn8_raw: o.reading.sn8_raw,
        })
        .collect();
    let violations = check_monotone(&rows);
    if opts.gate == MonotonicityGate::Enforce {
        if let Some(v) = violations.first() {
            return Err(Error::NonMonotone {
                column: v.column.clone(),
                modulus_mpa: v.modulus_mpa,
            });
        }
    }

    let matrix = DeflectionMatrix {
        offsets: tsd.grid()?.offsets(),
        moduli_mpa: spec.values_mpa.clone(),
        columns: outputs.into_iter().map(|o| o.profile.deflections).collect(),
    };
    let db = SlopeDatabase {
        manifest: Manifest {
            tool: TOOL_VERSION.to_string(),
            config_hash: config_hash(spec, tsd, opts.tolerance),
            base_structure: spec.base.id(),
            swept_layer: spec.layer,
            quadrature_tol: opts.tolerance,
            contact_mode: tsd.contact_mode,
            gravity: tsd.gravity,
            non_monotone: violations,
        },
        rows,
    };
    Ok((db, matrix))
}
