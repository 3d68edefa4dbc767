//! JSON run configuration. Moduli in MPa, lengths in m, loads in tonnes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsdsim::dataset::SweepSpec;
use tsdsim::elastic::{ElasticLayer, PavementStructure, Thickness, DEFAULT_TOLERANCE};
use tsdsim::inverse::ForwardModel;
use tsdsim::tsd::{ContactMode, TsdConfiguration, WheelLoad};

use crate::CliError;

const PA_PER_MPA: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub structure: StructureConfig,
    pub tsd: TsdSection,
    pub sweep: SweepSection,
    pub numerics: Numerics,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            structure: StructureConfig::default(),
            tsd: TsdSection::default(),
            sweep: SweepSection::default(),
            numerics: Numerics::default(),
            output_dir: PathBuf::from("tsd-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    /// `null` for the semi-infinite bottom layer.
    pub thickness_m: Option<f64>,
    pub modulus_mpa: f64,
    pub poisson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    pub layers: Vec<LayerConfig>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        let layer = |h: Option<f64>, e: f64| LayerConfig {
            thickness_m: h,
            modulus_mpa: e,
            poisson: 0.35,
        };
        Self {
            layers: vec![
                layer(Some(0.06), 7000.0),
                layer(Some(0.09), 9300.0),
                layer(Some(0.09), 9300.0),
                layer(None, 100.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelConfig {
    pub x_m: f64,
    pub y_m: f64,
    pub load_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsdSection {
    pub wheels: Vec<WheelConfig>,
    pub contact_pressure_mpa: f64,
    pub tire_radius_m: f64,
    pub contact_mode: ContactMode,
    pub measurement_line_y_m: f64,
    pub profile_start_m: f64,
    pub profile_end_m: f64,
    pub profile_step_m: f64,
    pub sensor_offsets_m: Vec<f64>,
    pub reference_offset_m: f64,
    pub speed_m_s: f64,
    pub load_frequency_hz: f64,
    pub temperature_c: f64,
    pub gravity_m_s2: f64,
}

impl Default for TsdSection {
    fn default() -> Self {
        let d = TsdConfiguration::<f64>::default();
        Self {
            wheels: d
                .wheels
                .iter()
                .map(|w| WheelConfig {
                    x_m: w.position.0,
                    y_m: w.position.1,
                    load_t: (w.force / d.gravity * 1000.0).round() / 1e6,
                })
                .collect(),
            contact_pressure_mpa: d.contact_pressure / PA_PER_MPA,
            tire_radius_m: d.tire_radius,
            contact_mode: d.contact_mode,
            measurement_line_y_m: d.measurement_line_y,
            profile_start_m: d.profile_range.0,
            profile_end_m: d.profile_range.1,
            profile_step_m: d.profile_step,
            sensor_offsets_m: d.sensor_offsets.clone(),
            reference_offset_m: d.reference_offset,
            speed_m_s: d.speed,
            load_frequency_hz: d.load_frequency,
            temperature_c: d.temperature_c,
            gravity_m_s2: d.gravity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// 0-based; `null` means the bottom layer.
    pub layer: Option<usize>,
    pub lo_mpa: f64,
    pub hi_mpa: f64,
    pub step_mpa: f64,
    /// Explicit list, overrides the range when present.
    pub values_mpa: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            layer: None,
            lo_mpa: 16.0,
            hi_mpa: 250.0,
            step_mpa: 1.0,
            values_mpa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub tolerance: f64,
    /// 0 = one per core.
    pub threads: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let tol = self.numerics.tolerance;
        if !(1e-12..=1e-4).contains(&tol) {
            return Err(CliError::Input(format!("numerics.tolerance: {tol} outside [1e-12, 1e-4]")));
        }
        self.structure()?;
        self.tsd()?.validate()?;
        self.sweep()?.validate()?;
        Ok(())
    }

    pub fn structure(&self) -> Result<PavementStructure<f64>, CliError> {
        let n = self.structure.layers.len();
        let layers = self
            .structure
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let thickness = match l.thickness_m {
                    Some(h) => Thickness::Finite(h),
                    None if i + 1 == n => Thickness::SemiInfinite,
                    None => {
                        return Err(CliError::Input(format!(
                            "structure.layers[{i}].thickness_m: only the last layer may be null"
                        )))
                    }
                };
                Ok(ElasticLayer::new(thickness, l.modulus_mpa * PA_PER_MPA, l.poisson))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PavementStructure::new(layers)?)
    }

    pub fn tsd(&self) -> Result<TsdConfiguration<f64>, CliError> {
        let t = &self.tsd;
        let g = t.gravity_m_s2;
        if !(g.is_finite() && g > 0.0) {
            return Err(CliError::Input(format!("tsd.gravity_m_s2: {g} must be positive")));
        }
        if let Some(i) = t.wheels.iter().position(|w| !(w.load_t.is_finite() && w.load_t >= 0.0)) {
            return Err(CliError::Input(format!("tsd.wheels[{i}].load_t must be non-negative")));
        }
        let cfg = TsdConfiguration {
            wheels: t.wheels.iter().map(|w| WheelLoad::from_tonnes(w.x_m, w.y_m, w.load_t, g)).collect(),
            contact_pressure: t.contact_pressure_mpa * PA_PER_MPA,
            tire_radius: t.tire_radius_m,
            contact_mode: t.contact_mode,
            measurement_line_y: t.measurement_line_y_m,
            profile_range: (t.profile_start_m, t.profile_end_m),
            profile_step: t.profile_step_m,
            sensor_offsets: t.sensor_offsets_m.clone(),
            reference_offset: t.reference_offset_m,
            speed: t.speed_m_s,
            load_frequency: t.load_frequency_hz,
            temperature_c: t.temperature_c,
            gravity: g,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_layer(&self) -> Result<usize, CliError> {
        let n = self.structure.layers.len();
        let layer = self.sweep.layer.unwrap_or(n.saturating_sub(1));
        if layer >= n {
            return Err(CliError::Input(format!("sweep.layer: {layer} out of range for {n} layers")));
        }
        Ok(layer)
    }

    pub fn sweep(&self) -> Result<SweepSpec, CliError> {
        let s = &self.sweep;
        let values_mpa = match &s.values_mpa {
            Some(v) => v.clone(),
            None => SweepSpec::range(s.lo_mpa, s.hi_mpa, s.step_mpa)?,
        };
        let spec = SweepSpec {
            base: self.structure()?,
            layer: self.sweep_layer()?,
            values_mpa,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn forward_model(&self) -> Result<ForwardModel, CliError> {
        Ok(ForwardModel {
            base: self.structure()?,
            layer: self.sweep_layer()?,
            tsd: self.tsd()?,
            tolerance: self.numerics.tolerance,
        })
    }
}
