//! Momentum/velocity algebra for a species with rest mass `m` moving at
//! momentum `p = (p1, p2)`.
//!
//! Every quantity that differs from its nonrelativistic counterpart by a
//! small amount is evaluated in a cancellation-free form, so the same code
//! path stays accurate from `c = 4` up to `c = 1e8`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The speed of light. `Infinite` selects the Vlasov-Poisson limit, which is
/// evaluated exactly rather than through a large finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSpeed {
    Finite(f64),
    Infinite,
}

impl LightSpeed {
    pub fn finite(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(LightSpeed::Finite(c))
        } else if c == f64::INFINITY {
            Ok(LightSpeed::Infinite)
        } else {
            Err(Error::Config(format!("speed of light must be positive, got {c}")))
        }
    }

    /// `1/c`, zero in the limit.
    pub fn inv(self) -> f64 {
        match self {
            LightSpeed::Finite(c) => 1.0 / c,
            LightSpeed::Infinite => 0.0,
        }
    }

    /// IEEE encoding, `+inf` for the limit.
    pub fn as_f64(self) -> f64 {
        match self {
            LightSpeed::Finite(c) => c,
            LightSpeed::Infinite => f64::INFINITY,
        }
    }

    pub fn from_f64(c: f64) -> Result<Self> {
        Self::finite(c)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, LightSpeed::Infinite)
    }
}

impl fmt::Display for LightSpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LightSpeed::Finite(c) => write!(f, "{c}"),
            LightSpeed::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for LightSpeed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(LightSpeed::Infinite);
        }
        let c: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse speed of light {s:?}")))?;
        Self::finite(c)
    }
}

impl Serialize for LightSpeed {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LightSpeed::Finite(c) => serializer.serialize_f64(*c),
            LightSpeed::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LightSpeed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(c) => LightSpeed::finite(c),
            Raw::Int(c) => LightSpeed::finite(c as f64),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Charge and rest mass of one particle species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub label: String,
    pub charge: f64,
    pub mass: f64,
}

impl SpeciesParams {
    pub fn new(label: impl Into<String>, charge: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("species mass must be positive, got {mass}")));
        }
        if !charge.is_finite() {
            return Err(Error::Config("species charge must be finite".into()));
        }
        Ok(Self { label: label.into(), charge, mass })
    }
}

#[inline]
fn norm2(p: [f64; 2]) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// `gamma = sqrt(m^2 + |p|^2 / c^2)`; note this carries units of mass.
#[inline]
pub fn lorentz_gamma(p: [f64; 2], species: &SpeciesParams, c: f64) -> f64 {
    gamma_raw(norm2(p), species.mass, 1.0 / c)
}

#[inline]
pub(crate) fn gamma_raw(p2: f64, mass: f64, inv_c: f64) -> f64 {
    let q = inv_c * inv_c * p2;
    (mass * mass + q).sqrt()
}

/// `gamma - m` without cancellation, as `(|p|^2/c^2) / (gamma + m)`.
#[inline]
pub fn gamma_minus_mass(p: [f64; 2], species: &SpeciesParams, c: f64) -> f64 {
    let inv_c = 1.0 / c;
    let p2 = norm2(p);
    let g = gamma_raw(p2, species.mass, inv_c);
    inv_c * inv_c * p2 / (g + species.mass)
}

/// Particle velocity `p / gamma`, or exactly `p / m` in the limit.
#[inline]
pub fn relativistic_velocity(p: [f64; 2], species: &SpeciesParams, c: LightSpeed) -> [f64; 2] {
    let g = match c {
        LightSpeed::Finite(c) => gamma_raw(norm2(p), species.mass, 1.0 / c),
        LightSpeed::Infinite => species.mass,
    };
    [p[0] / g, p[1] / g]
}

/// Kinetic weight `c^2 (gamma - m) = |p|^2 / (gamma + m)`; tends to
/// `|p|^2 / 2m` in the limit.
#[inline]
pub fn kinetic_weight(p: [f64; 2], species: &SpeciesParams, c: LightSpeed) -> f64 {
    let p2 = norm2(p);
    let g = gamma_raw(p2, species.mass, c.inv());
    p2 / (g + species.mass)
}

/// The pair `(sigma_plus, sigma_minus)` with
/// `sigma_pm = c^2 (gamma - m) (1 +- V1 / c)`.
///
/// The factor `1 - |V1|/c` is rewritten as
/// `(m^2 + p2^2/c^2) / (gamma (gamma + |p1|/c))` so it keeps full relative
/// precision for momenta nearly aligned with the x axis.
#[inline]
pub fn sigma_pm(p: [f64; 2], species: &SpeciesParams, c: f64) -> (f64, f64) {
    sigma_raw(p, species.mass, 1.0 / c)
}

#[inline]
pub(crate) fn sigma_raw(p: [f64; 2], mass: f64, inv_c: f64) -> (f64, f64) {
    let p2 = norm2(p);
    let g = gamma_raw(p2, mass, inv_c);
    let kin = p2 / (g + mass);
    let a1 = (p[0] * inv_c).abs();
    let toward = 1.0 + a1 / g;
    let against = (mass * mass + p[1] * p[1] * inv_c * inv_c) / (g * (g + a1));
    if p[0] >= 0.0 {
        (kin * toward, kin * against)
    } else {
        (kin * against, kin * toward)
    }
}

/// Pointwise lower bound `|p|^2 (m^2 + p2^2/c^2) / (4 gamma^3)` satisfied by
/// both components of [`sigma_pm`].
#[inline]
pub fn sigma_lower_bound(p: [f64; 2], species: &SpeciesParams, c: f64) -> f64 {
    let inv_c = 1.0 / c;
    let p2 = norm2(p);
    let g = gamma_raw(p2, species.mass, inv_c);
    let m = species.mass;
    p2 * (m * m + p[1] * p[1] * inv_c * inv_c) / (4.0 * g * g * g)
}

/// All per-momentum weights at once, for a finite speed of light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub p: [f64; 2],
    pub gamma: f64,
    pub v: [f64; 2],
    pub sigma_plus: f64,
    pub sigma_minus: f64,
}

impl KinematicSample {
    pub fn new(p: [f64; 2], species: &SpeciesParams, c: f64) -> Self {
        let gamma = lorentz_gamma(p, species, c);
        let (sigma_plus, sigma_minus) = sigma_pm(p, species, c);
        Self {
            p,
            gamma,
            v: [p[0] / gamma, p[1] / gamma],
            sigma_plus,
            sigma_minus,
        }
    }
}
