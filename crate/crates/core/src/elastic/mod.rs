//! Static surface response of an n-layer linear elastic isotropic system.
//!
//! The surface deflection under a uniform circular pressure `p` of radius
//! `a` is
//!
//! ```text
//! w(r) = p a ∫₀^∞ F(m)/m · J1(m a) · J0(m r) dm
//! ```
//!
//! where `F(m)` is the surface response kernel: `m` times the vertical
//! surface displacement produced by a unit normal traction of Hankel
//! wavenumber `m`. For a homogeneous half-space `F = 2(1-ν²)/E`.

pub mod bessel;
mod deflection;
mod elliptic;
pub mod hankel;
mod kernel;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use deflection::{halfspace_influence, surface_deflection, DeflectionSolver, DEFAULT_TOLERANCE};
pub use elliptic::{ellipe, ellipk};
pub use kernel::{surface_response_kernel, SurfaceKernelSamples, KernelGrid};

/// Vertical extent of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Thickness<T> {
    Finite(T),
    SemiInfinite,
}

impl<T: Real> Thickness<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Thickness::Finite(h) => Some(h),
            Thickness::SemiInfinite => None,
        }
    }
}

/// Interface condition between a layer and the one beneath it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bond {
    #[default]
    Bonded,
    Unbonded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticLayer<T> {
    pub thickness: Thickness<T>,
    /// Pa.
    pub youngs_modulus: T,
    pub poissons_ratio: T,
    pub bond: Bond,
    /// Metadata only.
    pub temperature_c: T,
}

impl<T: Real> ElasticLayer<T> {
    pub fn new(thickness: Thickness<T>, youngs_modulus: T, poissons_ratio: T) -> Self {
        Self {
            thickness,
            youngs_modulus,
            poissons_ratio,
            bond: Bond::Bonded,
            temperature_c: T::c(15.0),
        }
    }

    /// Finite layer of thickness `h` meters.
    pub fn finite(h: T, youngs_modulus: T, poissons_ratio: T) -> Self {
        Self::new(Thickness::Finite(h), youngs_modulus, poissons_ratio)
    }

    pub fn semi_infinite(youngs_modulus: T, poissons_ratio: T) -> Self {
        Self::new(Thickness::SemiInfinite, youngs_modulus, poissons_ratio)
    }

    /// Half-space kernel value `2(1-ν²)/E`.
    pub fn halfspace_kernel(&self) -> T {
        let nu = self.poissons_ratio;
        T::c(2.0) * (T::one() - nu * nu) / self.youngs_modulus
    }

    pub(crate) fn lame(&self) -> (T, T) {
        let e = self.youngs_modulus;
        let nu = self.poissons_ratio;
        let lambda = e * nu / ((T::one() + nu) * (T::one() - T::c(2.0) * nu));
        let mu = e / (T::c(2.0) * (T::one() + nu));
        (lambda, mu)
    }

    fn validate(&self, index: usize, is_last: bool) -> Result<()> {
        let field = |name: &str| format!("layer {} {name}", index + 1);
        let e = self.youngs_modulus;
        if !(e.is_finite() && e > T::zero()) {
            return Err(Error::invalid(field("youngs_modulus"), format!("{e} must be positive and finite")));
        }
        let nu = self.poissons_ratio;
        if !(nu > T::zero() && nu < T::c(0.5)) {
            return Err(Error::invalid(field("poissons_ratio"), format!("{nu} outside (0, 0.5)")));
        }
        match (self.thickness, is_last) {
            (Thickness::Finite(h), false) if h.is_finite() && h > T::zero() => {}
            (Thickness::Finite(h), false) => {
                return Err(Error::invalid(field("thickness"), format!("{h} must be positive and finite")))
            }
            (Thickness::SemiInfinite, true) => {}
            (Thickness::SemiInfinite, false) => {
                return Err(Error::invalid(field("thickness"), "only the last layer may be semi-infinite"))
            }
            (Thickness::Finite(_), true) => {
                return Err(Error::invalid(field("thickness"), "the last layer must be semi-infinite"))
            }
        }
        if !is_last && self.bond == Bond::Unbonded {
            return Err(Error::invalid(
                field("bond"),
                "unbonded interfaces are not supported; only fully bonded layers are implemented",
            ));
        }
        Ok(())
    }
}

/// Ordered layer stack, top first, ending in a semi-infinite layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ElasticLayer<T>>", into = "Vec<ElasticLayer<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PavementStructure<T> {
    layers: Vec<ElasticLayer<T>>,
}

impl<T: Real> PavementStructure<T> {
    pub fn new(layers: Vec<ElasticLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("structure", "at least one layer is required"));
        }
        let n = layers.len();
        for (i, layer) in layers.iter().enumerate() {
            layer.validate(i, i + 1 == n)?;
        }
        Ok(Self { layers })
    }

    /// Homogeneous half-space.
    pub fn halfspace(youngs_modulus: T, poissons_ratio: T) -> Result<Self> {
        Self::new(vec![ElasticLayer::semi_infinite(youngs_modulus, poissons_ratio)])
    }

    pub fn layers(&self) -> &[ElasticLayer<T>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn top(&self) -> &ElasticLayer<T> {
        &self.layers[0]
    }

    pub fn subgrade(&self) -> &ElasticLayer<T> {
        self.layers.last().expect("non-empty")
    }

    /// Sum of the finite layer thicknesses (zero for a half-space).
    pub fn total_thickness(&self) -> T {
        self.layers
            .iter()
            .filter_map(|l| l.thickness.finite())
            .fold(T::zero(), |a, h| a + h)
    }

    /// Copy with layer `index` (0-based) set to modulus `e` in Pa.
    pub fn with_modulus(&self, index: usize, e: T) -> Result<Self> {
        if index >= self.layers.len() {
            return Err(Error::invalid(
                "layer index",
                format!("{} out of range for a {}-layer structure", index + 1, self.layers.len()),
            ));
        }
        let mut layers = self.layers.clone();
        layers[index].youngs_modulus = e;
        Self::new(layers)
    }

    /// Copy with every modulus multiplied by `k`.
    pub fn scaled_moduli(&self, k: T) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .cloned()
            .map(|mut l| {
                l.youngs_modulus = l.youngs_modulus * k;
                l
            })
            .collect();
        Self::new(layers)
    }

    /// Stable short identifier derived from the mechanical parameters.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.layers {
            let thick = l.thickness.finite().map_or(-1.0, |t| t.as_f64());
            for v in [thick, l.youngs_modulus.as_f64(), l.poissons_ratio.as_f64()] {
                h.update(v.to_le_bytes());
            }
            h.update([matches!(l.bond, Bond::Bonded) as u8]);
        }
        let digest = h.finalize();
        hex::encode(&digest[..6])
    }
}

impl<T: Real> TryFrom<Vec<ElasticLayer<T>>> for PavementStructure<T> {
    type Error = Error;

    fn try_from(layers: Vec<ElasticLayer<T>>) -> Result<Self> {
        Self::new(layers)
    }
}

impl<T> From<PavementStructure<T>> for Vec<ElasticLayer<T>> {
    fn from(s: PavementStructure<T>) -> Self {
        s.layers
    }
}

/// Uniform vertical pressure on a circular disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularLoad<T> {
    /// Pa.
    pub pressure: T,
    /// m.
    pub radius: T,
    pub center: (T, T),
}

impl<T: Real> CircularLoad<T> {
    pub fn new(pressure: T, radius: T) -> Result<Self> {
        Self::at(pressure, radius, (T::zero(), T::zero()))
    }

    pub fn at(pressure: T, radius: T, center: (T, T)) -> Result<Self> {
        if !(pressure.is_finite() && pressure >= T::zero()) {
            return Err(Error::invalid("load pressure", format!("{pressure} must be finite and non-negative")));
        }
        if !(radius.is_finite() && radius > T::zero()) {
            return Err(Error::invalid("load radius", format!("{radius} must be positive and finite")));
        }
        Ok(Self { pressure, radius, center })
    }

    /// Total force `p π a²` in newtons.
    pub fn force(&self) -> T {
        self.pressure * T::PI() * self.radius * self.radius
    }

    /// Horizontal distance from the load center to `(x, y)`.
    pub fn distance_to(&self, x: T, y: T) -> T {
        (x - self.center.0).hypot(y - self.center.1)
    }
}

/// The four-layer structure of the reference pavement: 0.06 m HMA at
/// 7000 MPa, two 0.09 m BC-g2 lifts at 9300 MPa, and a semi-infinite
/// subgrade of modulus `subgrade_pa`; ν = 0.35 throughout, 15 °C.
pub fn reference_structure<T: Real>(subgrade_pa: T) -> Result<PavementStructure<T>> {
    let nu = T::c(0.35);
    PavementStructure::new(vec![
        ElasticLayer::finite(T::c(0.06), T::c(7000e6), nu),
        ElasticLayer::finite(T::c(0.09), T::c(9300e6), nu),
        ElasticLayer::finite(T::c(0.09), T::c(9300e6), nu),
        ElasticLayer::semi_infinite(subgrade_pa, nu),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_structure_is_valid() {
        let s = reference_structure(100e6f64).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.total_thickness() - 0.24).abs() < 1e-15);
        assert_eq!(s.subgrade().youngs_modulus, 100e6);
    }

    #[test]
    fn invariants_enforced() {
        let nu = 0.35f64;
        assert!(PavementStructure::<f64>::new(vec![]).is_err());
        assert!(PavementStructure::new(vec![ElasticLayer::finite(0.1, 1e9, nu)]).is_err());
        assert!(PavementStructure::new(vec![
            ElasticLayer::semi_infinite(1e9, nu),
            ElasticLayer::semi_infinite(1e8, nu)
        ])
        .is_err());
        assert!(PavementStructure::halfspace(-5.0, nu).is_err());
        assert!(PavementStructure::halfspace(1e8, 0.5).is_err());
        assert!(PavementStructure::halfspace(1e8, 0.0).is_err());
        assert!(PavementStructure::new(vec![ElasticLayer::finite(0.0, 1e9, nu), ElasticLayer::semi_infinite(1e8, nu)]).is_err());
    }

    #[test]
    fn unbonded_interface_rejected() {
        let mut top = ElasticLayer::finite(0.1, 5e9, 0.35f64);
        top.bond = Bond::Unbonded;
        let err = PavementStructure::new(vec![top, ElasticLayer::semi_infinite(1e8, 0.35)]).unwrap_err();
        assert!(err.to_string().contains("unbonded"));
    }

    #[test]
    fn id_tracks_parameters() {
        let a = reference_structure(100e6f64).unwrap();
        let b = reference_structure(100e6f64).unwrap();
        let c = reference_structure(101e6f64).unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), c.id());
    }

    #[test]
    fn serde_validates() {
        let json = r#"[{"thickness":{"Finite":0.1},"youngs_modulus":1e9,"poissons_ratio":0.35,"bond":"bonded","temperature_c":15.0}]"#;
        assert!(serde_json::from_str::<PavementStructure<f64>>(json).is_err());
    }

    #[test]
    fn load_force() {
        let l = CircularLoad::new(0.7e6f64, 0.15).unwrap();
        assert!((l.force() - 0.7e6 * std::f64::consts::PI * 0.0225).abs() < 1e-6);
        assert!(CircularLoad::new(1.0f64, 0.0).is_err());
    }
}
