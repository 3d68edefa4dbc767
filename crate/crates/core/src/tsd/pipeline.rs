use std::collections::{BTreeMap, HashMap};

use super::profile::{stencil_nodes, stencil_slope};
use super::{
    apply_reference_correction, differentiate, sample_sensors, DeflectionProfile, ProfileGrid, SensorReading,
    SlopeProfile, TsdConfiguration, SENSOR_COUNT,
};
use crate::elastic::{CircularLoad, DeflectionSolver, PavementStructure, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MICRONS_PER_METER: f64 = 1e6;

/// Output of the full per-structure pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub profile: DeflectionProfile<T>,
    /// Reference-corrected slope profile.
    pub slope: SlopeProfile<T>,
    pub reading: SensorReading<T>,
}

/// TSD forward model bound to one structure and one configuration.
#[derive(Debug, Clone)]
pub struct TsdSimulator<T> {
    solver: DeflectionSolver<T>,
    config: TsdConfiguration<T>,
    loads: Vec<CircularLoad<T>>,
    grid: ProfileGrid<T>,
    structure_id: String,
    config_hash: String,
}

type MemoKey = (u64, u64, u64);

impl<T: Real> TsdSimulator<T> {
    pub fn new(structure: &PavementStructure<T>, tsd: &TsdConfiguration<T>, tol: T) -> Result<Self> {
        tsd.validate()?;
        Ok(Self {
            solver: DeflectionSolver::new(structure, tol)?,
            loads: tsd.contact_loads()?,
            grid: tsd.grid()?,
            config: tsd.clone(),
            structure_id: structure.id(),
            config_hash: tsd.hash(),
        })
    }

    pub fn config(&self) -> &TsdConfiguration<T> {
        &self.config
    }

    pub fn grid(&self) -> &ProfileGrid<T> {
        &self.grid
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    fn check_offset(&self, x: T) -> Result<()> {
        let (lo, hi) = self.config.profile_range;
        if !(x >= lo && x <= hi) {
            return Err(Error::invalid("offset", format!("{x} m outside the profile range [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn wheel_deflection(&self, index: usize, x: T, memo: Option<&mut HashMap<MemoKey, T>>) -> Result<T> {
        let load = &self.loads[index];
        let r = load.distance_to(x, self.config.measurement_line_y);
        let eval = || {
            self.solver
                .deflection(load.pressure, load.radius, r)
                .map_err(|e| Error::Wheel {
                    index,
                    source: Box::new(e),
                })
        };
        match memo {
            None => eval(),
            Some(memo) => {
                let key = (load.pressure.as_f64().to_bits(), load.radius.as_f64().to_bits(), r.as_f64().to_bits());
                if let Some(&w) = memo.get(&key) {
                    return Ok(w);
                }
                let w = eval()?;
                memo.insert(key, w);
                Ok(w)
            }
        }
    }

    fn superpose(&self, x: T, mut memo: Option<&mut HashMap<MemoKey, T>>) -> Result<T> {
        let mut sum = T::zero();
        for i in 0..self.loads.len() {
            sum = sum + self.wheel_deflection(i, x, memo.as_deref_mut())?;
        }
        Ok(sum * T::c(MICRONS_PER_METER))
    }

    /// Superposed deflection (µm) at offset `x` on the measurement line.
    pub fn deflection_at(&self, x: T) -> Result<T> {
        self.check_offset(x)?;
        self.superpose(x, None)
    }

    /// Deflections (µm) at the given grid nodes, sharing repeated
    /// `(load, distance)` evaluations.
    fn deflections_at_nodes(&self, nodes: impl Iterator<Item = usize>) -> Result<Vec<T>> {
        let mut memo = HashMap::new();
        nodes.map(|i| self.superpose(self.grid.offset(i), Some(&mut memo))).collect()
    }

    pub fn profile(&self) -> Result<DeflectionProfile<T>> {
        Ok(DeflectionProfile {
            offsets: self.grid.offsets(),
            deflections: self.deflections_at_nodes(0..self.grid.len())?,
            structure_id: self.structure_id.clone(),
            config_hash: self.config_hash.clone(),
        })
    }

    /// Profile, corrected slope and sensor reading.
    pub fn run(&self) -> Result<PipelineOutput<T>> {
        let profile = self.profile()?;
        let raw = differentiate(&profile)?;
        let slope = apply_reference_correction(&raw, self.config.reference_offset)?;
        let reading = sample_sensors(&slope, &self.config)?;
        Ok(PipelineOutput {
            profile,
            slope,
            reading,
        })
    }

    /// Sensor reading computed from only the grid nodes its stencils need.
    ///
    /// Produces the same values as [`TsdSimulator::run`].
    pub fn sensor_reading(&self) -> Result<SensorReading<T>> {
        let n = self.grid.len();
        let sensors = self.config.sensor_indices()?;
        let reference = self.grid.index_of(self.config.reference_offset).expect("validated");
        let mut needed: Vec<usize> = sensors
            .iter()
            .chain(std::iter::once(&reference))
            .flat_map(|&i| stencil_nodes(i, n))
            .collect();
        needed.sort_unstable();
        needed.dedup();
        let values = self.deflections_at_nodes(needed.iter().copied())?;
        let w: BTreeMap<usize, T> = needed.into_iter().zip(values).collect();
        let h = self.grid.spacing();
        let slope_at = |i: usize| stencil_slope(|j| w[&j], i, n, h);
        let shift = slope_at(reference);
        let mut slopes = [T::zero(); SENSOR_COUNT];
        for (out, &i) in slopes.iter_mut().zip(&sensors) {
            *out = slope_at(i) - shift;
        }
        Ok(SensorReading {
            slopes,
            sn8_raw: shift,
            structure_id: self.structure_id.clone(),
        })
    }
}

/// Superposed deflection (µm) of all wheels at offset `x`.
pub fn superposed_deflection<T: Real>(structure: &PavementStructure<T>, tsd: &TsdConfiguration<T>, x: T) -> Result<T> {
    TsdSimulator::new(structure, tsd, T::c(DEFAULT_TOLERANCE))?.deflection_at(x)
}

/// Deflection profile over the configured range and step.
pub fn compute_profile<T: Real>(structure: &PavementStructure<T>, tsd: &TsdConfiguration<T>) -> Result<DeflectionProfile<T>> {
    TsdSimulator::new(structure, tsd, T::c(DEFAULT_TOLERANCE))?.profile()
}

pub fn run_pipeline<T: Real>(structure: &PavementStructure<T>, tsd: &TsdConfiguration<T>) -> Result<PipelineOutput<T>> {
    TsdSimulator::new(structure, tsd, T::c(DEFAULT_TOLERANCE))?.run()
}

pub fn sensor_reading<T: Real>(structure: &PavementStructure<T>, tsd: &TsdConfiguration<T>) -> Result<SensorReading<T>> {
    TsdSimulator::new(structure, tsd, T::c(DEFAULT_TOLERANCE))?.sensor_reading()
}
