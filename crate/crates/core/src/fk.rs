//! Closed-form direct kinematics.
//!
//! Loop 1 (the planar six-bar) fixes `gamma` on its own because link C1C2
//! stays parallel to the base. Loop 2 then gives `t` from the leg-3 circle,
//! `alpha` from a phase-shifted sine equation, and `beta` from the two
//! remaining scalar equations. Each stage has two roots, hence up to eight
//! assembly modes.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    closure_residuals, ActuatorInput, InternalConfig, MechanismParams, PlatformPose, Residuals,
};
use crate::numeric::{one_minus_sq, root_sqrt, ZERO_SLACK};
use crate::sign::Sign;

/// Loop 1 is treated as a parallelogram (self-motion) when `|B| < 1e-9 l2`.
pub const DEGENERATE_REL: f64 = 1e-9;
/// Acceptance threshold on `|residual| / max(1, l2², l6²)`.
pub const RESIDUAL_REL: f64 = 1e-9;
/// Solutions closer than this (mm and rad) are merged.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FkError {
    #[error("self-motion: loop 1 is a parallelogram and gamma is indeterminate")]
    SelfMotion,
    #[error("no real assembly")]
    NoRealSolution,
}

/// Assembly-mode code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FkBranch {
    pub sigma_gamma: Sign,
    pub sigma_t: Sign,
    pub sigma_alpha: Sign,
}

impl FkBranch {
    pub const fn new(sigma_gamma: Sign, sigma_t: Sign, sigma_alpha: Sign) -> Self {
        Self {
            sigma_gamma,
            sigma_t,
            sigma_alpha,
        }
    }

    /// All eight codes in canonical order.
    pub fn all() -> impl Iterator<Item = FkBranch> {
        Sign::BOTH.into_iter().flat_map(|g| {
            Sign::BOTH
                .into_iter()
                .flat_map(move |t| Sign::BOTH.into_iter().map(move |a| FkBranch::new(g, t, a)))
        })
    }

    pub fn parse(code: &str) -> Option<FkBranch> {
        let signs: Vec<Sign> = code
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ',' | ' '))
            .map(Sign::parse)
            .collect::<Option<_>>()?;
        match signs[..] {
            [g, t, a] => Some(FkBranch::new(g, t, a)),
            _ => None,
        }
    }
}

impl fmt::Display for FkBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.sigma_gamma, self.sigma_t, self.sigma_alpha)
    }
}

/// Coefficients of the closed-form stages for one `(gamma, t)` branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkIntermediates {
    /// `A = 2 l2`
    pub a: f64,
    /// `B = y_A1 - y_A2 - l3`
    pub b: f64,
    pub h1: f64,
    pub h2: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

impl FkIntermediates {
    pub fn d_gamma(&self) -> f64 {
        one_minus_sq(self.b / self.a)
    }

    pub fn d_t(&self) -> f64 {
        self.h2
    }

    pub fn d_alpha(&self) -> f64 {
        self.j1 * self.j1 + self.j2 * self.j2 - self.j3 * self.j3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRoot {
    pub gamma: f64,
    pub sigma_gamma: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loop2Root {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_t: Sign,
    pub sigma_alpha: Sign,
    pub intermediates: FkIntermediates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkSolution {
    pub pose: PlatformPose,
    pub cfg: InternalConfig,
    pub branch: FkBranch,
    pub residuals: Residuals,
}

/// Loop-1 coefficients `(A, B)`.
pub fn loop_one_coefficients(input: &ActuatorInput, p: &MechanismParams) -> (f64, f64) {
    (2.0 * p.l2, input.y_a1 - input.y_a2 - p.l3)
}

/// `cos gamma = -B/A`, both signs of `sin gamma`. A single root is returned
/// at the fold `|B| = A`.
pub fn solve_gamma(input: &ActuatorInput, p: &MechanismParams) -> Result<Vec<GammaRoot>, FkError> {
    let (a, b) = loop_one_coefficients(input, p);
    if b.abs() < DEGENERATE_REL * p.l2 {
        return Err(FkError::SelfMotion);
    }
    let ratio = -b / a;
    let sin_gamma = root_sqrt(one_minus_sq(ratio), 1.0).ok_or(FkError::NoRealSolution)?;
    if sin_gamma == 0.0 {
        return Ok(vec![GammaRoot {
            gamma: if ratio < 0.0 { PI } else { 0.0 },
            sigma_gamma: Sign::Plus,
        }]);
    }
    let g = sin_gamma.atan2(ratio);
    Ok(vec![
        GammaRoot {
            gamma: g,
            sigma_gamma: Sign::Plus,
        },
        GammaRoot {
            gamma: -g,
            sigma_gamma: Sign::Minus,
        },
    ])
}

/// Leg-3 circle coefficients `(H1, H2)` for a given `gamma`; `t = -H1 ± √H2`.
pub fn leg_three_coefficients(gamma: f64, input: &ActuatorInput, p: &MechanismParams) -> (f64, f64) {
    let (sg, cg) = gamma.sin_cos();
    let y_c3 = input.y_a1 + p.l2 * cg - p.l3 / 2.0;
    let h1 = p.l2 * sg - p.l8 - p.l7;
    let h2 = p.l6 * p.l6 - (y_c3 - input.y_a3).powi(2);
    (h1, h2)
}

/// `(J1, J2, J3)` of `J1 sin α + J2 cos α + J3 = 0` for a given `t`.
pub fn alpha_coefficients(t: f64, p: &MechanismParams) -> (f64, f64, f64) {
    let bd = p.b - p.d;
    (
        2.0 * p.l4 * t,
        4.0 * p.l4 * bd,
        p.l6 * p.l6 - p.l4 * p.l4 - t * t - 4.0 * bd * bd,
    )
}

/// Root of `J1 sin α + J2 cos α + J3 = 0` written as `R cos(α - φ) = -J3`
/// with `φ = atan2(J1, J2)`. `merge` collapses rounding-level discriminants.
fn alpha_root(j1: f64, j2: f64, j3: f64, sign: Sign, merge: bool) -> Option<f64> {
    let r2 = j1 * j1 + j2 * j2;
    if r2 == 0.0 {
        return None;
    }
    let disc = r2 - j3 * j3;
    let root = if merge {
        root_sqrt(disc, r2)?
    } else if disc < -ZERO_SLACK * r2 {
        return None;
    } else {
        disc.max(0.0).sqrt()
    };
    let phase = j1.atan2(j2);
    let half = root.atan2(-j3);
    Some(phase + sign.value() * half)
}

/// Loop-2 roots for one gamma branch: `t = -H1 ± √H2`, then both roots of
/// `J1 sin α + J2 cos α + J3 = 0`, then `beta` from `t` and the x-chain.
pub fn solve_loop2(
    root: &GammaRoot,
    input: &ActuatorInput,
    p: &MechanismParams,
) -> Result<Vec<Loop2Root>, FkError> {
    let (a, b) = loop_one_coefficients(input, p);
    let (h1, h2) = leg_three_coefficients(root.gamma, input, p);
    let sq = root_sqrt(h2, p.l6 * p.l6).ok_or(FkError::NoRealSolution)?;
    let t_roots: &[(Sign, f64)] = if sq > 0.0 {
        &[(Sign::Plus, -h1 + sq), (Sign::Minus, -h1 - sq)]
    } else {
        &[(Sign::Plus, -h1)]
    };

    let bd = p.b - p.d;
    let mut out = Vec::new();
    for &(sigma_t, t) in t_roots {
        let (j1, j2, j3) = alpha_coefficients(t, p);
        let intermediates = FkIntermediates {
            a,
            b,
            h1,
            h2,
            j1,
            j2,
            j3,
        };
        let mut previous: Option<f64> = None;
        for sigma_alpha in Sign::BOTH {
            let Some(alpha) = alpha_root(j1, j2, j3, sigma_alpha, true) else {
                continue;
            };
            if previous.is_some_and(|prev| (prev - alpha).abs() == 0.0) {
                continue;
            }
            previous = Some(alpha);
            let (sa, ca) = alpha.sin_cos();
            let sb = (p.l4 * sa - t) / p.l6;
            let cb = (p.l4 * ca - 2.0 * bd) / p.l6;
            if sb.abs() > 1.0 + 1e-9 || (sb.hypot(cb) - 1.0).abs() > 1e-9 {
                continue;
            }
            out.push(Loop2Root {
                t,
                alpha: crate::model::normalize_angle(alpha),
                beta: sb.atan2(cb),
                sigma_t,
                sigma_alpha,
                intermediates,
            });
        }
    }
    if out.is_empty() {
        Err(FkError::NoRealSolution)
    } else {
        Ok(out)
    }
}

/// Platform position from the passive angles.
pub fn platform_pose(input: &ActuatorInput, gamma: f64, alpha: f64, p: &MechanismParams) -> PlatformPose {
    PlatformPose::new(
        -p.b + p.l4 * alpha.cos() + p.d,
        input.y_a1 + p.l2 * gamma.cos() - p.l3 / 2.0,
        p.l1 + p.l2 * gamma.sin() + p.l4 * alpha.sin(),
    )
}

fn residual_tolerance(p: &MechanismParams) -> f64 {
    RESIDUAL_REL * 1f64.max(p.l2 * p.l2).max(p.l6 * p.l6)
}

fn residuals_ok(r: &Residuals, p: &MechanismParams) -> bool {
    r.max_abs() <= residual_tolerance(p)
}

/// All real assembly modes, sorted by branch code, merged at folds.
pub fn direct_kinematics(
    input: &ActuatorInput,
    p: &MechanismParams,
) -> Result<Vec<FkSolution>, FkError> {
    let gammas = match solve_gamma(input, p) {
        Ok(g) => g,
        Err(FkError::NoRealSolution) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut all = Vec::new();
    for g in &gammas {
        let Ok(loop2) = solve_loop2(g, input, p) else {
            continue;
        };
        for r in loop2 {
            let cfg = InternalConfig::new(g.gamma, r.alpha, r.beta, p);
            let residuals = closure_residuals(input, &cfg, p);
            if !residuals_ok(&residuals, p) {
                continue;
            }
            all.push(FkSolution {
                pose: platform_pose(input, cfg.gamma, cfg.alpha, p),
                cfg,
                branch: FkBranch::new(g.sigma_gamma, r.sigma_t, r.sigma_alpha),
                residuals,
            });
        }
    }
    all.sort_by_key(|s| s.branch);
    let mut kept: Vec<FkSolution> = Vec::with_capacity(all.len());
    for s in all {
        let duplicate = kept.iter().any(|k| {
            k.pose.distance(&s.pose) <= MERGE_TOL && k.cfg.angle_distance(&s.cfg) <= MERGE_TOL
        });
        if !duplicate {
            kept.push(s);
        }
    }
    Ok(kept)
}

/// Evaluates one assembly mode directly from its code, without merging.
///
/// `Ok(None)` when any stage of the branch is complex.
pub fn solve_branch(
    input: &ActuatorInput,
    branch: FkBranch,
    p: &MechanismParams,
) -> Result<Option<FkSolution>, FkError> {
    let (a, b) = loop_one_coefficients(input, p);
    if b.abs() < DEGENERATE_REL * p.l2 {
        return Err(FkError::SelfMotion);
    }
    let ratio = -b / a;
    let d_gamma = one_minus_sq(ratio);
    if d_gamma < -ZERO_SLACK {
        return Ok(None);
    }
    let gamma = branch.sigma_gamma.value() * d_gamma.max(0.0).sqrt().atan2(ratio);
    let root = GammaRoot {
        gamma,
        sigma_gamma: branch.sigma_gamma,
    };
    let (h1, h2) = leg_three_coefficients(gamma, input, p);
    if h2 < -ZERO_SLACK * p.l6 * p.l6 {
        return Ok(None);
    }
    let t = -h1 + branch.sigma_t.value() * h2.max(0.0).sqrt();
    let bd = p.b - p.d;
    let (j1, j2, j3) = alpha_coefficients(t, p);
    let Some(alpha) = alpha_root(j1, j2, j3, branch.sigma_alpha, false) else {
        return Ok(None);
    };
    let (sa, ca) = alpha.sin_cos();
    let beta = ((p.l4 * sa - t) / p.l6).atan2((p.l4 * ca - 2.0 * bd) / p.l6);
    let cfg = InternalConfig::new(root.gamma, alpha, beta, p);
    let residuals = closure_residuals(input, &cfg, p);
    Ok(Some(FkSolution {
        pose: platform_pose(input, cfg.gamma, cfg.alpha, p),
        cfg,
        branch,
        residuals,
    }))
}
