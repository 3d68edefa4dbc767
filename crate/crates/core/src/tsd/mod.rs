//! Traffic speed deflectometer simulation: multi-wheel superposition along
//! the measurement line, slope profiles, reference-sensor correction and
//! sensor sampling.
//!
//! Vehicle frame: `x` runs from the rear axle (`x = 0`) toward the front
//! wheel groups, `y` across the vehicle. Deflections are reported in µm
//! (downward positive) and slopes in µm/m.

mod pipeline;
mod profile;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elastic::CircularLoad;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use pipeline::{
    compute_profile, run_pipeline, sensor_reading, superposed_deflection, PipelineOutput, TsdSimulator,
};
pub use profile::{
    apply_reference_correction, basin_indices, basin_indices_at, differentiate, sample_sensors, BasinIndices,
    DeflectionProfile, SensorReading, SlopeProfile,
};

/// Number of measuring sensors (Sn1..Sn7).
pub const SENSOR_COUNT: usize = 7;

/// Standard gravity used to convert tonnes to newtons.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// How the tyre contact disc is derived from the wheel load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactMode {
    /// Fixed contact pressure; radius `sqrt(F / (π P))`.
    #[default]
    Pressure,
    /// Fixed tyre radius; pressure `F / (π R²)`.
    Radius,
}

impl ContactMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactMode::Pressure => "pressure",
            ContactMode::Radius => "radius",
        }
    }
}

impl std::str::FromStr for ContactMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pressure" => Ok(ContactMode::Pressure),
            "radius" => Ok(ContactMode::Radius),
            other => Err(Error::invalid("contact mode", format!("'{other}' is not 'pressure' or 'radius'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelLoad<T> {
    /// `(R_x, R_y)` in meters, vehicle frame.
    pub position: (T, T),
    /// Newtons.
    pub force: T,
}

impl<T: Real> WheelLoad<T> {
    pub fn new(rx: T, ry: T, force: T) -> Self {
        Self {
            position: (rx, ry),
            force,
        }
    }

    pub fn from_tonnes(rx: T, ry: T, tonnes: T, gravity: T) -> Self {
        Self::new(rx, ry, tonnes * T::c(1000.0) * gravity)
    }

    /// Contact disc for this wheel.
    ///
    /// An unloaded wheel yields a zero-pressure disc of radius
    /// `tire_radius`, which contributes nothing.
    pub fn contact(&self, mode: ContactMode, pressure: T, tire_radius: T) -> Result<CircularLoad<T>> {
        if self.force == T::zero() {
            return CircularLoad::at(T::zero(), tire_radius, self.position);
        }
        match mode {
            ContactMode::Pressure => {
                let a = (self.force / (T::PI() * pressure)).sqrt();
                CircularLoad::at(pressure, a, self.position)
            }
            ContactMode::Radius => {
                let p = self.force / (T::PI() * tire_radius * tire_radius);
                CircularLoad::at(p, tire_radius, self.position)
            }
        }
    }
}

/// Uniform sampling grid `start, start + step, …, end` on the
/// measurement line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileGrid<T> {
    start: T,
    step: T,
    len: usize,
    /// `1/step` when it is an integer, so offsets are computed as `i / n`
    /// and land on the nearest representable decimal.
    per_unit: Option<T>,
}

impl<T: Real> ProfileGrid<T> {
    pub fn new(start: T, end: T, step: T) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::invalid("profile_range", format!("[{start}, {end}] is empty or not finite")));
        }
        if !(step.is_finite() && step > T::zero()) {
            return Err(Error::invalid("profile_step", format!("{step} must be positive")));
        }
        let count = (end - start) / step;
        let intervals = count.round();
        if (count - intervals).abs() > T::c(1e-6) || intervals < T::c(2.0) {
            return Err(Error::invalid(
                "profile_step",
                format!("{step} does not divide the range [{start}, {end}] into at least 2 intervals"),
            ));
        }
        let inv = step.recip();
        let per_unit = ((inv - inv.round()).abs() <= T::c(1e-9) * inv).then(|| inv.round());
        Ok(Self {
            start,
            step,
            len: intervals.to_usize().expect("finite count") + 1,
            per_unit,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn offset(&self, i: usize) -> T {
        let i = T::from_usize_lossy(i);
        match self.per_unit {
            Some(n) => self.start + i / n,
            None => self.start + i * self.step,
        }
    }

    pub fn offsets(&self) -> Vec<T> {
        (0..self.len).map(|i| self.offset(i)).collect()
    }

    /// Mean spacing of the realised offsets.
    pub fn spacing(&self) -> T {
        (self.offset(self.len - 1) - self.offset(0)) / T::from_usize_lossy(self.len - 1)
    }

    /// Index of the node at `x`, or `None` if `x` is not on the grid.
    pub fn index_of(&self, x: T) -> Option<usize> {
        let k = ((x - self.start) / self.step).round();
        if !(k >= T::zero()) {
            return None;
        }
        let i = k.to_usize()?;
        if i >= self.len {
            return None;
        }
        ((self.offset(i) - x).abs() <= T::c(1e-9) * self.step).then_some(i)
    }
}

/// The 10-wheel TSD load and the measurement layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsdConfiguration<T> {
    pub wheels: Vec<WheelLoad<T>>,
    /// Pa.
    pub contact_pressure: T,
    /// m.
    pub tire_radius: T,
    pub contact_mode: ContactMode,
    /// `y` of the measurement line, m.
    pub measurement_line_y: T,
    /// `[start, end]`, m.
    pub profile_range: (T, T),
    pub profile_step: T,
    /// Sn1..Sn7 offsets, m.
    pub sensor_offsets: Vec<T>,
    /// Sn8 offset, m.
    pub reference_offset: T,
    /// m/s, metadata.
    pub speed: T,
    /// Hz, metadata.
    pub load_frequency: T,
    /// °C, metadata.
    pub temperature_c: T,
    /// m/s², used for tonne inputs.
    pub gravity: T,
}

/// Wheel table: `(R_x, R_y, load in tonnes)`.
const DEFAULT_WHEELS: [(f64, f64, f64); 10] = [
    (0.0, -0.187, 2.875),
    (0.0, 0.187, 2.875),
    (0.0, 1.913, 2.875),
    (0.0, 2.287, 2.875),
    (8.15, -0.187, 1.55),
    (8.15, 0.187, 1.55),
    (8.15, 1.913, 1.55),
    (8.15, 2.287, 1.55),
    (11.75, -0.187, 3.15),
    (11.75, 2.287, 3.15),
];

impl<T: Real> Default for TsdConfiguration<T> {
    fn default() -> Self {
        let g = T::c(STANDARD_GRAVITY);
        Self {
            wheels: DEFAULT_WHEELS
                .iter()
                .map(|&(x, y, t)| WheelLoad::from_tonnes(T::c(x), T::c(y), T::c(t), g))
                .collect(),
            contact_pressure: T::c(0.92e6),
            tire_radius: T::c(0.15),
            contact_mode: ContactMode::Pressure,
            measurement_line_y: T::zero(),
            profile_range: (T::zero(), T::c(4.0)),
            profile_step: T::c(0.01),
            sensor_offsets: [0.1, 0.2, 0.3, 0.45, 0.6, 0.9, 1.1].iter().map(|&s| T::c(s)).collect(),
            reference_offset: T::c(3.8),
            speed: T::c(20.0),
            load_frequency: T::c(10.0),
            temperature_c: T::c(15.0),
            gravity: g,
        }
    }
}

impl<T: Real> TsdConfiguration<T> {
    pub fn grid(&self) -> Result<ProfileGrid<T>> {
        ProfileGrid::new(self.profile_range.0, self.profile_range.1, self.profile_step)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.wheels.is_empty() {
            return Err(Error::invalid("wheels", "at least one wheel is required"));
        }
        for (i, w) in self.wheels.iter().enumerate() {
            if !(w.force.is_finite() && w.force >= T::zero()) {
                return Err(Error::invalid(format!("wheel {i} load"), format!("{} must be non-negative", w.force)));
            }
            if !(w.position.0.is_finite() && w.position.1.is_finite()) {
                return Err(Error::invalid(format!("wheel {i} position"), "must be finite"));
            }
        }
        if !(self.contact_pressure.is_finite() && self.contact_pressure > T::zero()) {
            return Err(Error::invalid("contact_pressure", format!("{} must be positive", self.contact_pressure)));
        }
        if !(self.tire_radius.is_finite() && self.tire_radius > T::zero()) {
            return Err(Error::invalid("tire_radius", format!("{} must be positive", self.tire_radius)));
        }
        if !self.measurement_line_y.is_finite() {
            return Err(Error::invalid("measurement_line_y", "must be finite"));
        }
        if self.sensor_offsets.len() != SENSOR_COUNT {
            return Err(Error::invalid(
                "sensor_offsets",
                format!("expected {SENSOR_COUNT} offsets, got {}", self.sensor_offsets.len()),
            ));
        }
        for pair in self.sensor_offsets.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::invalid("sensor_offsets", "offsets must be strictly increasing"));
            }
        }
        for &s in &self.sensor_offsets {
            if grid.index_of(s).is_none() {
                return Err(Error::invalid(
                    "sensor_offsets",
                    format!("{s} m is not a grid node of the profile range"),
                ));
            }
        }
        if grid.index_of(self.reference_offset).is_none() {
            return Err(Error::invalid(
                "reference_offset",
                format!("{} m is not a grid node of the profile range", self.reference_offset),
            ));
        }
        if !(self.gravity.is_finite() && self.gravity > T::zero()) {
            return Err(Error::invalid("gravity", format!("{} must be positive", self.gravity)));
        }
        Ok(())
    }

    /// Contact discs of all wheels, in wheel order.
    pub fn contact_loads(&self) -> Result<Vec<CircularLoad<T>>> {
        self.wheels
            .iter()
            .enumerate()
            .map(|(i, w)| {
                w.contact(self.contact_mode, self.contact_pressure, self.tire_radius)
                    .map_err(|e| Error::Wheel {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect()
    }

    /// Copy with every wheel load multiplied by `k` and the contact discs
    /// kept at their current size, so the surface traction scales by `k`.
    ///
    /// In pressure-fixed mode the contact pressure is scaled too. `k = 0`
    /// unloads every wheel.
    pub fn scaled_loads(&self, k: T) -> Self {
        let mut out = self.clone();
        for w in &mut out.wheels {
            w.force = w.force * k;
        }
        if k > T::zero() && self.contact_mode == ContactMode::Pressure {
            out.contact_pressure = self.contact_pressure * k;
        }
        out
    }

    /// Copy holding only wheel `index`.
    pub fn single_wheel(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.wheels = vec![self.wheels[index]];
        out
    }

    /// Grid indices of Sn1..Sn7.
    pub fn sensor_indices(&self) -> Result<[usize; SENSOR_COUNT]> {
        self.validate()?;
        let grid = self.grid()?;
        let mut out = [0; SENSOR_COUNT];
        for (slot, &s) in out.iter_mut().zip(&self.sensor_offsets) {
            *slot = grid.index_of(s).expect("validated");
        }
        Ok(out)
    }

    /// Short hash of every field that affects the simulated output.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |v: T| h.update(v.as_f64().to_le_bytes());
        for w in &self.wheels {
            put(w.position.0);
            put(w.position.1);
            put(w.force);
        }
        put(self.contact_pressure);
        put(self.tire_radius);
        put(self.measurement_line_y);
        put(self.profile_range.0);
        put(self.profile_range.1);
        put(self.profile_step);
        for &s in &self.sensor_offsets {
            put(s);
        }
        put(self.reference_offset);
        h.update(self.contact_mode.as_str().as_bytes());
        hex::encode(&h.finalize()[..8])
    }
}
