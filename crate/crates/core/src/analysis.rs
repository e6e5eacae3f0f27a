//! Jacobians, singularity predicates and discriminant margins.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::fk::{alpha_coefficients, leg_three_coefficients, solve_branch, solve_gamma, FkBranch, FkError};
use crate::ik::feasibility;
use crate::model::{ActuatorInput, InternalConfig, MechanismParams, PlatformPose, PointSet};
use crate::sign::Sign;

/// Default flag tolerance on the dimensionless margins.
pub const DEFAULT_FLAG_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("step size must be positive")]
    NonPositiveStep,
    #[error("branch {0} does not exist at the requested input")]
    BranchAbsent(FkBranch),
    #[error("branch {0} vanished inside the difference stencil")]
    BranchVanished(FkBranch),
    #[error("closure equations are singular in the passive angles")]
    Singular,
    #[error(transparent)]
    Fk(#[from] FkError),
}

/// `j[i][k] = ∂pose_i / ∂q_k`, rows `(x, y, z)`, columns `(y_A1, y_A2, y_A3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianMatrix {
    pub j: [[f64; 3]; 3],
    pub branch: Option<FkBranch>,
    /// Finite-difference step, `None` for the implicit form.
    pub step: Option<f64>,
}

impl JacobianMatrix {
    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.j[r][c])
    }

    pub fn singular_values(&self) -> [f64; 3] {
        let sv = self.matrix().singular_values();
        let mut v = [sv[0], sv[1], sv[2]];
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// `σ_max / σ_min`, infinite when rank deficient.
    pub fn condition_number(&self) -> f64 {
        let [max, _, min] = self.singular_values();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    pub fn max_abs_difference(&self, other: &JacobianMatrix) -> f64 {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| (self.j[r][c] - other.j[r][c]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn default_step(p: &MechanismParams) -> f64 {
    1e-5 * p.length_scale()
}

/// Central differences on branch-tracked direct kinematics.
pub fn numeric_jacobian(
    input: &ActuatorInput,
    branch: FkBranch,
    p: &MechanismParams,
    h: f64,
) -> Result<JacobianMatrix, AnalysisError> {
    if !(h > 0.0) {
        return Err(AnalysisError::NonPositiveStep);
    }
    if solve_branch(input, branch, p)?.is_none() {
        return Err(AnalysisError::BranchAbsent(branch));
    }
    let mut j = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut plus = input.to_array();
        let mut minus = input.to_array();
        plus[k] += h;
        minus[k] -= h;
        let at = |q: [f64; 3]| -> Result<PlatformPose, AnalysisError> {
            match solve_branch(&ActuatorInput::from_array(q), branch, p) {
                Ok(Some(s)) => Ok(s.pose),
                _ => Err(AnalysisError::BranchVanished(branch)),
            }
        };
        let (a, b) = (at(plus)?.to_vector(), at(minus)?.to_vector());
        for r in 0..3 {
            j[r][k] = (a[r] - b[r]) / (2.0 * h);
        }
    }
    Ok(JacobianMatrix {
        j,
        branch: Some(branch),
        step: Some(h),
    })
}

/// Jacobian from the implicit function theorem on the closure equations:
/// `J = P_q - P_c R_c⁻¹ R_q`, with `P` the platform position and `R` the
/// residuals, differentiated in inputs `q` and passive angles `c`.
pub fn implicit_jacobian(
    input: &ActuatorInput,
    cfg: &InternalConfig,
    p: &MechanismParams,
) -> Result<JacobianMatrix, AnalysisError> {
    let (sg, cg) = cfg.gamma.sin_cos();
    let (sa, ca) = cfg.alpha.sin_cos();
    let (sb, cb) = cfg.beta.sin_cos();
    let u = input.y_a1 - input.y_a2 - p.l3;
    let x = -2.0 * p.b + p.l4 * ca + 2.0 * p.d - p.l6 * cb;
    let y = input.y_a1 + p.l2 * cg - p.l3 / 2.0 - input.y_a3;
    let z = p.l2 * sg + p.l4 * sa - p.l8 - p.l6 * sb - p.l7;

    #[rustfmt::skip]
    let r_c = Matrix3::new(
        -2.0 * u * p.l2 * sg, 0.0, 0.0,
        2.0 * y * (-p.l2 * sg) + 2.0 * z * p.l2 * cg,
        -2.0 * x * p.l4 * sa + 2.0 * z * p.l4 * ca,
        2.0 * x * p.l6 * sb - 2.0 * z * p.l6 * cb,
        0.0, -p.l4 * sa, p.l6 * sb,
    );
    let leg1 = 2.0 * (u + p.l2 * cg);
    #[rustfmt::skip]
    let r_q = Matrix3::new(
        leg1, -leg1, 0.0,
        2.0 * y, 0.0, -2.0 * y,
        0.0, 0.0, 0.0,
    );
    #[rustfmt::skip]
    let p_c = Matrix3::new(
        0.0, -p.l4 * sa, 0.0,
        -p.l2 * sg, 0.0, 0.0,
        p.l2 * cg, p.l4 * ca, 0.0,
    );
    #[rustfmt::skip]
    let p_q = Matrix3::new(
        0.0, 0.0, 0.0,
        1.0, 0.0, 0.0,
        0.0, 0.0, 0.0,
    );
    let dc_dq = r_c.lu().solve(&r_q).ok_or(AnalysisError::Singular)?;
    let m = p_q - p_c * dc_dq;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Singular);
    }
    Ok(JacobianMatrix {
        j: [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ],
        branch: None,
        step: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityFlags {
    pub serial: Vec<String>,
    pub parallel: Vec<String>,
    pub constraint: Vec<String>,
    /// Dimensionless distance to each condition; a flag is set iff its
    /// margin is `<= tol`.
    pub margins: BTreeMap<String, f64>,
    pub tol: f64,
}

impl SingularityFlags {
    pub fn is_regular(&self) -> bool {
        self.serial.is_empty() && self.parallel.is_empty() && self.constraint.is_empty()
    }

    pub fn min_margin(&self) -> Option<(&str, f64)> {
        self.margins
            .iter()
            .map(|(k, &v)| (k.as_str(), v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub const SERIAL_CONDITIONS: [&str; 5] = [
    "B1C1-vertical",
    "B2C2-vertical",
    "B3C3-vertical",
    "D1D2-vertical",
    "D3E3-vertical",
];
pub const PARALLEL_CONDITIONS: [&str; 3] = [
    "loop1-legs-parallel",
    "loop2-links-parallel",
    "C3B3-parallel-P3-axis",
];
pub const CONSTRAINT_CONDITIONS: [&str; 2] = ["parallelogram-1-flat", "parallelogram-2-flat"];

/// `|component along axis| / |v|`, or 0 for a null vector.
fn axis_share(v: nalgebra::Vector3<f64>, axis: usize) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        0.0
    } else {
        v[axis].abs() / n
    }
}

/// Sine of the angle between `v` and a coordinate axis.
fn off_axis(v: nalgebra::Vector3<f64>, axis: usize) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        0.0
    } else {
        let mut w = v;
        w[axis] = 0.0;
        w.norm() / n
    }
}

pub fn singularity_flags(
    cfg: &InternalConfig,
    points: &PointSet,
    p: &MechanismParams,
    tol: f64,
) -> SingularityFlags {
    let serial = [
        axis_share(points.c1 - points.b1, 1),
        axis_share(points.c2 - points.b2, 1),
        axis_share(points.c3 - points.b3, 1),
        axis_share(points.d2 - points.d1, 0),
        axis_share(points.e3 - points.d3, 0),
    ];
    let parallel = [
        cfg.gamma.sin().abs(),
        (cfg.alpha - cfg.beta).sin().abs(),
        (points.c3.z - p.l1).abs() / p.l6,
    ];
    let constraint = [
        off_axis(points.c3 - points.b3, 1),
        off_axis(points.e3 - points.d3, 2),
    ];
    let mut margins = BTreeMap::new();
    let mut pick = |names: &[&str], values: &[f64]| -> Vec<String> {
        let mut set = Vec::new();
        for (name, &v) in names.iter().zip(values) {
            margins.insert(name.to_string(), v);
            if v <= tol {
                set.push(name.to_string());
            }
        }
        set
    };
    let serial = pick(&SERIAL_CONDITIONS, &serial);
    let parallel = pick(&PARALLEL_CONDITIONS, &parallel);
    let constraint = pick(&CONSTRAINT_CONDITIONS, &constraint);
    SingularityFlags {
        serial,
        parallel,
        constraint,
        margins,
        tol,
    }
}

/// Value of one direct-kinematics discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margin {
    /// As defined by the closed form: `D_gamma` dimensionless, `D_t` in mm²,
    /// `D_alpha` in mm⁴.
    pub raw: f64,
    /// `raw` over its natural scale (`1`, `l6²`, `J1² + J2²`).
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminantMargins {
    /// `1 - (B / 2 l2)²`
    pub d_gamma: Margin,
    /// `H2` per real gamma branch.
    pub d_t: Vec<(Sign, Margin)>,
    /// `J1² + J2² - J3²` per real `(gamma, t)` branch.
    pub d_alpha: Vec<(Sign, Sign, Margin)>,
}

impl DiscriminantMargins {
    /// Flat `(name, margin)` list, e.g. `D_t[+]`, `D_alpha[+-]`.
    pub fn named(&self) -> Vec<(String, Margin)> {
        let mut out = vec![("D_gamma".to_string(), self.d_gamma)];
        for (g, m) in &self.d_t {
            out.push((format!("D_t[{g}]"), *m));
        }
        for (g, t, m) in &self.d_alpha {
            out.push((format!("D_alpha[{g}{t}]"), *m));
        }
        out
    }

    /// Smallest normalized margin and its name.
    pub fn min_normalized(&self) -> (String, f64) {
        self.named()
            .into_iter()
            .map(|(n, m)| (n, m.normalized))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("D_gamma is always present")
    }
}

pub fn singularity_margins(
    input: &ActuatorInput,
    p: &MechanismParams,
) -> Result<DiscriminantMargins, FkError> {
    let b = input.y_a1 - input.y_a2 - p.l3;
    let ratio = b / (2.0 * p.l2);
    let dg = (1.0 - ratio) * (1.0 + ratio);
    let d_gamma = Margin {
        raw: dg,
        normalized: dg,
    };
    let gammas = match solve_gamma(input, p) {
        Ok(g) => g,
        Err(FkError::NoRealSolution) => Vec::new(),
        Err(e) => return Err(e),
    };
    let l6sq = p.l6 * p.l6;
    let mut d_t = Vec::new();
    let mut d_alpha = Vec::new();
    for g in &gammas {
        let (h1, h2) = leg_three_coefficients(g.gamma, input, p);
        d_t.push((
            g.sigma_gamma,
            Margin {
                raw: h2,
                normalized: h2 / l6sq,
            },
        ));
        if h2 < 0.0 {
            continue;
        }
        let sq = h2.sqrt();
        let t_roots: &[(Sign, f64)] = if sq > 0.0 {
            &[(Sign::Plus, -h1 + sq), (Sign::Minus, -h1 - sq)]
        } else {
            &[(Sign::Plus, -h1)]
        };
        for &(sigma_t, t) in t_roots {
            let (j1, j2, j3) = alpha_coefficients(t, p);
            let r2 = j1 * j1 + j2 * j2;
            let raw = r2 - j3 * j3;
            d_alpha.push((
                g.sigma_gamma,
                sigma_t,
                Margin {
                    raw,
                    normalized: raw / r2,
                },
            ));
        }
    }
    Ok(DiscriminantMargins {
        d_gamma,
        d_t,
        d_alpha,
    })
}

/// Inverse-kinematics feasibility margins for a pose, normalized:
/// `1 - |cos α|`, `1 - |cos β|` and `M_i / L_i²` per `(σ_α, σ_β)` branch.
pub fn serial_margins(pose: &PlatformPose, p: &MechanismParams) -> Vec<(String, f64)> {
    let f = feasibility(pose, p);
    let mut out = vec![
        ("alpha_arg".to_string(), f.alpha_margin),
        ("beta_arg".to_string(), f.beta_margin),
    ];
    let l2sq = p.l2 * p.l2;
    let l6sq = p.l6 * p.l6;
    for b in &f.branches {
        let tag = format!("{}{}", b.sigma_alpha, b.sigma_beta);
        out.push((format!("M1[{tag}]"), b.m.m1 / l2sq));
        out.push((format!("M2[{tag}]"), b.m.m2 / l2sq));
        out.push((format!("M3[{tag}]"), b.m.m3 / l6sq));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::direct_kinematics;
    use crate::model::chain_points;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const TABLE_INPUT: ActuatorInput = ActuatorInput::new(350.0, -300.0, -25.0);
    const PRINCIPAL: FkBranch = FkBranch::new(Sign::Plus, Sign::Plus, Sign::Minus);

    fn p() -> MechanismParams {
        MechanismParams::reference()
    }

    #[test]
    fn decoupled_row_at_reference_input() {
        let p = p();
        for s in direct_kinematics(&TABLE_INPUT, &p).unwrap() {
            let j = numeric_jacobian(&TABLE_INPUT, s.branch, &p, default_step(&p)).unwrap();
            assert!((j.j[1][0] - 0.5).abs() < 1e-6);
            assert!((j.j[1][1] - 0.5).abs() < 1e-6);
            assert!(j.j[1][2].abs() < 1e-9);
        }
    }

    #[test]
    fn implicit_matches_numeric() {
        let p = p();
        for s in direct_kinematics(&TABLE_INPUT, &p).unwrap() {
            let num = numeric_jacobian(&TABLE_INPUT, s.branch, &p, default_step(&p)).unwrap();
            let imp = implicit_jacobian(&TABLE_INPUT, &s.cfg, &p).unwrap();
            let scale = imp.j.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(num.max_abs_difference(&imp) < 1e-6 * scale, "{num:?} vs {imp:?}");
            assert!((imp.j[1][0] - 0.5).abs() < 1e-12 && imp.j[1][2].abs() < 1e-12);
        }
    }

    #[test]
    fn central_difference_is_second_order() {
        let p = p();
        let exact = implicit_jacobian(
            &TABLE_INPUT,
            &solve_branch(&TABLE_INPUT, PRINCIPAL, &p).unwrap().unwrap().cfg,
            &p,
        )
        .unwrap();
        let e1 = numeric_jacobian(&TABLE_INPUT, PRINCIPAL, &p, 0.4).unwrap().max_abs_difference(&exact);
        let e2 = numeric_jacobian(&TABLE_INPUT, PRINCIPAL, &p, 0.2).unwrap().max_abs_difference(&exact);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_and_branch_errors() {
        let p = p();
        assert_eq!(
            numeric_jacobian(&TABLE_INPUT, PRINCIPAL, &p, 0.0),
            Err(AnalysisError::NonPositiveStep)
        );
        let fold = ActuatorInput::new(2.0 * p.l2 + p.l3 - 100.0, -100.0, 0.0);
        let r = numeric_jacobian(&fold, PRINCIPAL, &p, 1e-3);
        assert!(matches!(
            r,
            Err(AnalysisError::BranchVanished(_)) | Err(AnalysisError::BranchAbsent(_))
        ));
    }

    #[test]
    fn principal_branch_is_regular() {
        let p = p();
        let s = solve_branch(&TABLE_INPUT, PRINCIPAL, &p).unwrap().unwrap();
        let flags = singularity_flags(&s.cfg, &chain_points(&TABLE_INPUT, &s.cfg, &p), &p, DEFAULT_FLAG_TOL);
        assert!(flags.is_regular(), "{flags:?}");
        let (name, m) = flags.min_margin().unwrap();
        assert!(m > 0.05, "{name} = {m}");
    }

    #[test]
    fn vertical_d1d2_is_serial() {
        let p = p();
        let cfg = InternalConfig::new(1.0, FRAC_PI_2, 0.3, &p);
        let flags = singularity_flags(&cfg, &chain_points(&TABLE_INPUT, &cfg, &p), &p, DEFAULT_FLAG_TOL);
        assert!(flags.serial.contains(&"D1D2-vertical".to_string()));
    }

    #[test]
    fn flat_loop_one_is_parallel() {
        let p = p();
        let cfg = InternalConfig::new(0.0, 0.4, 0.3, &p);
        let flags = singularity_flags(&cfg, &chain_points(&TABLE_INPUT, &cfg, &p), &p, DEFAULT_FLAG_TOL);
        assert!(flags.parallel.contains(&"loop1-legs-parallel".to_string()));
    }

    #[test]
    fn margins_for_reference_input() {
        let p = p();
        let m = singularity_margins(&TABLE_INPUT, &p).unwrap();
        assert!((m.d_gamma.raw - (1.0 - (510.0f64 / 560.0).powi(2))).abs() < 1e-15);
        assert_eq!(m.d_t.len(), 2);
        for (_, d) in &m.d_t {
            assert!((d.raw - 50400.0).abs() < 1e-9);
        }
        assert_eq!(m.d_alpha.len(), 4);
    }

    #[test]
    fn d_gamma_vanishes_at_fold() {
        let p = p();
        let q = ActuatorInput::new(2.0 * p.l2 + p.l3 - 40.0, -40.0, 0.0);
        assert_eq!(singularity_margins(&q, &p).unwrap().d_gamma.raw, 0.0);
    }

    #[test]
    fn self_motion_propagates() {
        let q = ActuatorInput::new(350.0, 210.0, -25.0);
        assert_eq!(singularity_margins(&q, &p()), Err(FkError::SelfMotion));
    }

    proptest! {
        #[test]
        fn flags_follow_margins(g in -3.1f64..3.1, a in -3.1f64..3.1, b in -3.1f64..3.1, tol in 1e-3f64..0.5) {
            let p = p();
            let cfg = InternalConfig::new(g, a, b, &p);
            let flags = singularity_flags(&cfg, &chain_points(&TABLE_INPUT, &cfg, &p), &p, tol);
            for (name, &m) in &flags.margins {
                let set = flags.serial.contains(name) || flags.parallel.contains(name) || flags.constraint.contains(name);
                prop_assert_eq!(set, m <= tol);
            }
        }

        #[test]
        fn decoupled_row_everywhere(y1 in -400.0f64..400.0, u in 30.0f64..540.0, y3 in -300.0f64..300.0) {
            let p = p();
            let q = ActuatorInput::new(y1, y1 - p.l3 - u, y3);
            for s in direct_kinematics(&q, &p).unwrap() {
                if let Ok(j) = implicit_jacobian(&q, &s.cfg, &p) {
                    prop_assert!((j.j[1][0] - 0.5).abs() < 1e-12);
                    prop_assert!((j.j[1][1] - 0.5).abs() < 1e-12);
                    prop_assert!(j.j[1][2].abs() < 1e-12);
                }
            }
        }
    }
}
