//! Geometric model of the mechanism.
//!
//! Everything else in the crate is checked against the loop-closure residuals
//! defined here. The model is the midpoint model: each parallelogram is
//! represented by the segment joining the midpoints of its short links, so the
//! short-link length `l5` never enters a position equation.
//!
//! Frame: origin at the centre of the base, `Y` along the two coaxial sliders,
//! `Z` up. Units are millimetres and radians throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameter names in canonical order.
pub const PARAM_KEYS: [&str; 11] = [
    "a", "b", "d", "l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8",
];

/// Lengths that must be strictly positive. `d`, `l7` and `l8` may be zero.
const STRICTLY_POSITIVE: [&str; 8] = ["a", "b", "l1", "l2", "l3", "l4", "l5", "l6"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("missing parameter `{0}`")]
    MissingKey(String),
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("parameter `{0}` must be strictly positive")]
    NonPositiveLength(String),
    #[error("parameter `{0}` must be non-negative")]
    NegativeLength(String),
    #[error("parameter `{0}` is not a finite number")]
    NotANumber(String),
    #[error("malformed parameter file: {0}")]
    Parse(String),
}

/// The eleven dimensions of the mechanism, in millimetres.
///
/// * `a`, `b`: half length and half width of the base rectangle.
/// * `d`: half of the platform segment D2F3.
/// * `l1`: height of the driving links.
/// * `l2`: length of the two legs of the planar loop.
/// * `l3`, `l4`: lengths of the intermediate links 11 and 12.
/// * `l5`, `l6`: short and long link lengths of both parallelograms.
/// * `l7`: connector between the parallelograms, `l8`: platform connector link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub l7: f64,
    pub l8: f64,
}

impl MechanismParams {
    /// The reference prototype dimensions used throughout the test suite.
    pub fn reference() -> Self {
        Self {
            a: 300.0,
            b: 150.0,
            d: 50.0,
            l1: 30.0,
            l2: 280.0,
            l3: 140.0,
            l4: 180.0,
            l5: 90.0,
            l6: 230.0,
            l7: 0.0,
            l8: 0.0,
        }
    }

    /// Parses a flat JSON object `{"a": .., ..., "l8": ..}` and validates it.
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| ModelError::Parse("expected a JSON object".into()))?;
        let mut raw = BTreeMap::new();
        for (key, v) in object {
            let number = v
                .as_f64()
                .ok_or_else(|| ModelError::NotANumber(key.clone()))?;
            raw.insert(key.clone(), number);
        }
        validate_params(&raw)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters always serialize")
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "a" => self.a,
            "b" => self.b,
            "d" => self.d,
            "l1" => self.l1,
            "l2" => self.l2,
            "l3" => self.l3,
            "l4" => self.l4,
            "l5" => self.l5,
            "l6" => self.l6,
            "l7" => self.l7,
            "l8" => self.l8,
            _ => return None,
        })
    }

    /// Largest link length; used as the length scale for tolerances.
    pub fn length_scale(&self) -> f64 {
        self.l2.max(self.l4).max(self.l6)
    }
}

/// Builds validated parameters from a name/value map.
///
/// Missing keys are reported before bad values, in canonical key order.
pub fn validate_params(raw: &BTreeMap<String, f64>) -> Result<MechanismParams, ModelError> {
    if let Some(key) = raw.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
        return Err(ModelError::UnknownKey(key.clone()));
    }
    if let Some(key) = PARAM_KEYS.iter().find(|k| !raw.contains_key(**k)) {
        return Err(ModelError::MissingKey((*key).to_string()));
    }
    for key in PARAM_KEYS {
        let v = raw[key];
        if !v.is_finite() {
            return Err(ModelError::NotANumber(key.to_string()));
        }
        if STRICTLY_POSITIVE.contains(&key) {
            if v <= 0.0 {
                return Err(ModelError::NonPositiveLength(key.to_string()));
            }
        } else if v < 0.0 {
            return Err(ModelError::NegativeLength(key.to_string()));
        }
    }
    Ok(MechanismParams {
        a: raw["a"],
        b: raw["b"],
        d: raw["d"],
        l1: raw["l1"],
        l2: raw["l2"],
        l3: raw["l3"],
        l4: raw["l4"],
        l5: raw["l5"],
        l6: raw["l6"],
        l7: raw["l7"],
        l8: raw["l8"],
    })
}

/// Slider positions along `Y` of the three actuated prismatic joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorInput {
    pub y_a1: f64,
    pub y_a2: f64,
    pub y_a3: f64,
}

impl ActuatorInput {
    pub const fn new(y_a1: f64, y_a2: f64, y_a3: f64) -> Self {
        Self { y_a1, y_a2, y_a3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.y_a1, self.y_a2, self.y_a3]
    }

    pub fn from_array(q: [f64; 3]) -> Self {
        Self::new(q[0], q[1], q[2])
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let [a, b, c] = self.to_array();
        let [x, y, z] = other.to_array();
        ((a - x).powi(2) + (b - y).powi(2) + (c - z).powi(2)).sqrt()
    }
}

/// Position of the platform centre O′ in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PlatformPose {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// Passive angles of the chain plus the derived scalar `t`.
///
/// `gamma` is the angle of leg B1C1 from `+Y` in the plane `x = -b`; `alpha`
/// and `beta` are the angles of D1D2 and D3E3 from `+X` in planes of constant
/// `y`. `t = l4 sin(alpha) - l6 sin(beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t: f64,
}

impl InternalConfig {
    /// Normalizes the angles to (-π, π] and derives `t`.
    pub fn new(gamma: f64, alpha: f64, beta: f64, p: &MechanismParams) -> Self {
        let (gamma, alpha, beta) = (
            normalize_angle(gamma),
            normalize_angle(alpha),
            normalize_angle(beta),
        );
        Self {
            gamma,
            alpha,
            beta,
            t: p.l4 * alpha.sin() - p.l6 * beta.sin(),
        }
    }

    /// Largest angular difference to another configuration, wrap-aware.
    pub fn angle_distance(&self, other: &Self) -> f64 {
        angle_diff(self.gamma, other.gamma)
            .abs()
            .max(angle_diff(self.alpha, other.alpha).abs())
            .max(angle_diff(self.beta, other.beta).abs())
    }
}

/// Maps an angle to (-π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed difference `a - b` mapped to (-π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// All labelled joint centres of the chain, global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSet {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
    pub a3: Vector3<f64>,
    pub b1: Vector3<f64>,
    pub b2: Vector3<f64>,
    pub b3: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
    pub c3: Vector3<f64>,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
    pub d3: Vector3<f64>,
    pub e3: Vector3<f64>,
    pub f3: Vector3<f64>,
    pub o_prime: Vector3<f64>,
}

impl PointSet {
    pub fn labeled(&self) -> [(&'static str, Vector3<f64>); 15] {
        [
            ("A1", self.a1),
            ("A2", self.a2),
            ("A3", self.a3),
            ("B1", self.b1),
            ("B2", self.b2),
            ("B3", self.b3),
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("D1", self.d1),
            ("D2", self.d2),
            ("D3", self.d3),
            ("E3", self.e3),
            ("F3", self.f3),
            ("O'", self.o_prime),
        ]
    }

    pub fn pose(&self) -> PlatformPose {
        PlatformPose::new(self.o_prime.x, self.o_prime.y, self.o_prime.z)
    }
}

/// Walks both loops from the sliders to the platform for an arbitrary
/// configuration. Nothing is assumed to close, so this is also the evaluation
/// point for residuals away from valid assemblies.
pub fn chain_points(input: &ActuatorInput, cfg: &InternalConfig, p: &MechanismParams) -> PointSet {
    let (sg, cg) = cfg.gamma.sin_cos();
    let (sa, ca) = cfg.alpha.sin_cos();
    let (sb, cb) = cfg.beta.sin_cos();

    let a1 = Vector3::new(-p.b, input.y_a1, 0.0);
    let a2 = Vector3::new(-p.b, input.y_a2, 0.0);
    let a3 = Vector3::new(p.b, input.y_a3, 0.0);
    let lift = Vector3::new(0.0, 0.0, p.l1);
    let (b1, b2, b3) = (a1 + lift, a2 + lift, a3 + lift);

    let c1 = b1 + p.l2 * Vector3::new(0.0, cg, sg);
    let c2 = c1 - Vector3::new(0.0, p.l3, 0.0);
    let d1 = (c1 + c2) * 0.5;
    let d2 = d1 + p.l4 * Vector3::new(ca, 0.0, sa);
    let o_prime = d2 + Vector3::new(p.d, 0.0, 0.0);
    let f3 = o_prime + Vector3::new(p.d, 0.0, 0.0);
    let e3 = f3 - Vector3::new(0.0, 0.0, p.l8);
    let d3 = e3 - p.l6 * Vector3::new(cb, 0.0, sb);
    let c3 = d3 - Vector3::new(0.0, 0.0, p.l7);

    PointSet {
        a1,
        a2,
        a3,
        b1,
        b2,
        b3,
        c1,
        c2,
        c3,
        d1,
        d2,
        d3,
        e3,
        f3,
        o_prime,
    }
}

/// Loop-closure residuals. All three vanish exactly at a valid assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `|B2C2|² - l2²`, mm².
    pub loop1: f64,
    /// `|B3C3|² - l6²`, mm².
    pub loop2: f64,
    /// `l4 cos α + 2d - l6 cos β - 2b`, mm.
    pub xchain: f64,
}

impl Residuals {
    /// Dimensionless residuals: squared lengths over the squared link
    /// length, the x-chain defect over `l6`.
    pub fn scaled(&self, p: &MechanismParams) -> [f64; 3] {
        [
            self.loop1 / (p.l2 * p.l2),
            self.loop2 / (p.l6 * p.l6),
            self.xchain / p.l6,
        ]
    }

    pub fn scaled_norm(&self, p: &MechanismParams) -> f64 {
        let [a, b, c] = self.scaled(p);
        (a * a + b * b + c * c).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.loop1.abs().max(self.loop2.abs()).max(self.xchain.abs())
    }
}

pub fn closure_residuals(
    input: &ActuatorInput,
    cfg: &InternalConfig,
    p: &MechanismParams,
) -> Residuals {
    residuals_of_points(&chain_points(input, cfg, p), cfg, p)
}

pub(crate) fn residuals_of_points(
    pts: &PointSet,
    cfg: &InternalConfig,
    p: &MechanismParams,
) -> Residuals {
    Residuals {
        loop1: (pts.c2 - pts.b2).norm_squared() - p.l2 * p.l2,
        loop2: (pts.c3 - pts.b3).norm_squared() - p.l6 * p.l6,
        xchain: p.l4 * cfg.alpha.cos() + 2.0 * p.d - p.l6 * cfg.beta.cos() - 2.0 * p.b,
    }
}
