//! Closed-form inverse kinematics.
//!
//! The x-coordinate of the platform fixes `cos α` and `cos β` directly, so
//! the only branching is two signs for each of `α` and `β` and two slider
//! positions per leg (circle/line intersections): 2 × 2 × 2³ = 32 working
//! modes at most.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{one_minus_sq, root_sqrt};
use crate::model::{ActuatorInput, InternalConfig, MechanismParams, PlatformPose};
use crate::sign::Sign;

/// Tripwire tolerance on the automatically satisfied x-chain identity.
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum IkError {
    #[error("pose is unreachable")]
    Unreachable,
}

/// Working-mode code, nested in the order alpha, beta, leg 1, leg 2, leg 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IkBranch {
    pub sigma_alpha: Sign,
    pub sigma_beta: Sign,
    pub sigma_1: Sign,
    pub sigma_2: Sign,
    pub sigma_3: Sign,
}

impl fmt::Display for IkBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}{}{}",
            self.sigma_alpha, self.sigma_beta, self.sigma_1, self.sigma_2, self.sigma_3
        )
    }
}

/// Leg discriminants `M_i` for one `(α, β)` pair, mm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkIntermediates {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IkSolution {
    pub input: ActuatorInput,
    pub cfg: InternalConfig,
    pub branch: IkBranch,
    /// Some stage of this solution sits on a double root.
    pub merged: bool,
}

/// Platform-side joint centres for one `(α, β)` pair.
#[derive(Debug, Clone, Copy)]
struct UpperChain {
    c1: Vector3<f64>,
    c2: Vector3<f64>,
    c3: Vector3<f64>,
}

fn upper_chain(pose: &PlatformPose, alpha: f64, beta: f64, p: &MechanismParams) -> UpperChain {
    let zc = pose.z - p.l4 * alpha.sin();
    UpperChain {
        c1: Vector3::new(-p.b, pose.y + p.l3 / 2.0, zc),
        c2: Vector3::new(-p.b, pose.y - p.l3 / 2.0, zc),
        c3: Vector3::new(p.b, pose.y, pose.z - p.l8 - p.l6 * beta.sin() - p.l7),
    }
}

fn leg_discriminants(chain: &UpperChain, p: &MechanismParams) -> IkIntermediates {
    IkIntermediates {
        m1: p.l2 * p.l2 - (chain.c1.z - p.l1).powi(2),
        m2: p.l2 * p.l2 - (chain.c2.z - p.l1).powi(2),
        m3: p.l6 * p.l6 - (chain.c3.z - p.l1).powi(2),
    }
}

/// `±acos(c)` with a single entry on the fold. Empty when `|c| > 1`.
fn signed_acos(c: f64) -> Vec<(Sign, f64)> {
    match root_sqrt(one_minus_sq(c), 1.0) {
        None => Vec::new(),
        Some(s) if s == 0.0 => vec![(Sign::Plus, if c < 0.0 { std::f64::consts::PI } else { 0.0 })],
        Some(s) => {
            let v = s.atan2(c);
            vec![(Sign::Plus, v), (Sign::Minus, -v)]
        }
    }
}

/// `centre ± √m` with a single entry at `m = 0`.
fn slider_roots(centre: f64, m: f64, scale: f64) -> Vec<(Sign, f64)> {
    match root_sqrt(m, scale) {
        None => Vec::new(),
        Some(s) if s == 0.0 => vec![(Sign::Plus, centre)],
        Some(s) => vec![(Sign::Plus, centre + s), (Sign::Minus, centre - s)],
    }
}

/// Arccos arguments `(cos α, cos β)` fixed by the platform x-coordinate.
pub fn angle_arguments(pose: &PlatformPose, p: &MechanismParams) -> (f64, f64) {
    ((pose.x + p.b - p.d) / p.l4, (pose.x + p.d - p.b) / p.l6)
}

pub fn inverse_kinematics(
    pose: &PlatformPose,
    p: &MechanismParams,
) -> Result<Vec<IkSolution>, IkError> {
    let (ca, cb) = angle_arguments(pose, p);
    let alphas = signed_acos(ca);
    let betas = signed_acos(cb);
    let mut out = Vec::new();
    for &(sigma_alpha, alpha) in &alphas {
        for &(sigma_beta, beta) in &betas {
            let identity = p.l4 * alpha.cos() - p.l6 * beta.cos() - 2.0 * (p.b - p.d);
            debug_assert!(
                identity.abs() <= IDENTITY_TOL * p.length_scale(),
                "x-chain identity violated by {identity}"
            );
            let chain = upper_chain(pose, alpha, beta, p);
            let m = leg_discriminants(&chain, p);
            let legs1 = slider_roots(chain.c1.y, m.m1, p.l2 * p.l2);
            let legs2 = slider_roots(chain.c2.y, m.m2, p.l2 * p.l2);
            let legs3 = slider_roots(chain.c3.y, m.m3, p.l6 * p.l6);
            let merged_stage = alphas.len() == 1
                || betas.len() == 1
                || legs1.len() == 1
                || legs2.len() == 1
                || legs3.len() == 1;
            for &(sigma_1, y1) in &legs1 {
                let gamma = (chain.c1.z - p.l1).atan2(chain.c1.y - y1);
                let cfg = InternalConfig::new(gamma, alpha, beta, p);
                for &(sigma_2, y2) in &legs2 {
                    for &(sigma_3, y3) in &legs3 {
                        out.push(IkSolution {
                            input: ActuatorInput::new(y1, y2, y3),
                            cfg,
                            branch: IkBranch {
                                sigma_alpha,
                                sigma_beta,
                                sigma_1,
                                sigma_2,
                                sigma_3,
                            },
                            merged: merged_stage,
                        });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        Err(IkError::Unreachable)
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchDiscriminants {
    pub sigma_alpha: Sign,
    pub sigma_beta: Sign,
    pub alpha: f64,
    pub beta: f64,
    pub m: IkIntermediates,
}

impl BranchDiscriminants {
    pub fn all_real(&self) -> bool {
        self.m.m1 >= 0.0 && self.m.m2 >= 0.0 && self.m.m3 >= 0.0
    }
}

/// Discriminant report for a pose. Margins of the arccos arguments are
/// `1 - |arg|`; negative means out of reach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub alpha_arg: f64,
    pub beta_arg: f64,
    pub alpha_margin: f64,
    pub beta_margin: f64,
    pub branches: Vec<BranchDiscriminants>,
    pub reachable: bool,
}

pub fn feasibility(pose: &PlatformPose, p: &MechanismParams) -> Feasibility {
    let (ca, cb) = angle_arguments(pose, p);
    let mut branches = Vec::new();
    for &(sigma_alpha, alpha) in &signed_acos(ca) {
        for &(sigma_beta, beta) in &signed_acos(cb) {
            let chain = upper_chain(pose, alpha, beta, p);
            branches.push(BranchDiscriminants {
                sigma_alpha,
                sigma_beta,
                alpha,
                beta,
                m: leg_discriminants(&chain, p),
            });
        }
    }
    let reachable = branches.iter().any(BranchDiscriminants::all_real);
    Feasibility {
        alpha_arg: ca,
        beta_arg: cb,
        alpha_margin: 1.0 - ca.abs(),
        beta_margin: 1.0 - cb.abs(),
        branches,
        reachable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::{direct_kinematics, FkBranch};
    use proptest::prelude::*;

    const TABLE_INPUT: ActuatorInput = ActuatorInput::new(350.0, -300.0, -25.0);

    fn p() -> MechanismParams {
        MechanismParams::reference()
    }

    fn principal_pose() -> PlatformPose {
        direct_kinematics(&TABLE_INPUT, &p())
            .unwrap()
            .into_iter()
            .find(|s| s.branch == FkBranch::new(Sign::Plus, Sign::Plus, Sign::Minus))
            .unwrap()
            .pose
    }

    #[test]
    fn every_reference_mode_recovers_the_inputs() {
        let p = p();
        for s in direct_kinematics(&TABLE_INPUT, &p).unwrap() {
            let sols = inverse_kinematics(&s.pose, &p).unwrap();
            assert!(sols.iter().any(|r| r.input.distance(&TABLE_INPUT) < 1e-9));
        }
    }

    #[test]
    fn principal_pose_slider_pair() {
        let p = p();
        let pose = principal_pose();
        let sols = inverse_kinematics(&pose, &p).unwrap();
        assert_eq!(sols.len(), 32);
        let on_branch: Vec<f64> = sols
            .iter()
            .filter(|s| s.branch.sigma_alpha == Sign::Minus)
            .map(|s| s.input.y_a1)
            .collect();
        assert!(on_branch.iter().any(|y| (y - 350.0).abs() < 1e-9));
        assert!(on_branch.iter().any(|y| (y + 160.0).abs() < 1e-9));
        assert!(on_branch
            .iter()
            .all(|y| (y - 350.0).abs() < 1e-9 || (y + 160.0).abs() < 1e-9));
    }

    #[test]
    fn vertical_leg_merges_slider_roots() {
        let p = p();
        let pose = principal_pose();
        let alpha = -((pose.x + p.b - p.d) / p.l4).acos();
        let z = p.l1 + p.l2 + p.l4 * alpha.sin();
        let vertical = PlatformPose::new(pose.x, pose.y, z);
        let sols = inverse_kinematics(&vertical, &p).unwrap();
        assert!(sols.len() <= 16);
        let on_branch: Vec<_> = sols
            .iter()
            .filter(|s| s.branch.sigma_alpha == Sign::Minus)
            .collect();
        assert!(!on_branch.is_empty());
        for s in on_branch {
            assert!(s.merged);
            assert!((s.input.y_a1 - (vertical.y + p.l3 / 2.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn alpha_fold_and_out_of_reach() {
        let p = p();
        let fold = feasibility(&PlatformPose::new(80.0, 0.0, 100.0), &p);
        assert_eq!(fold.alpha_arg, 1.0);
        assert_eq!(fold.alpha_margin, 0.0);
        assert!(fold.branches.iter().all(|b| b.sigma_alpha == Sign::Plus));

        let far = PlatformPose::new(10.0 * p.l4, 0.0, 0.0);
        let f = feasibility(&far, &p);
        assert!(f.alpha_margin < 0.0);
        assert!(!f.reachable);
        assert_eq!(inverse_kinematics(&far, &p), Err(IkError::Unreachable));
    }

    #[test]
    fn fk_output_is_feasible() {
        let p = p();
        for s in direct_kinematics(&TABLE_INPUT, &p).unwrap() {
            let f = feasibility(&s.pose, &p);
            assert!(f.reachable);
            assert!(f.alpha_margin > 0.0 && f.beta_margin > 0.0);
            assert!(f
                .branches
                .iter()
                .any(|b| b.m.m1 > 0.0 && b.m.m2 > 0.0 && b.m.m3 > 0.0));
        }
    }

    proptest! {
        #[test]
        fn slider_pairs_are_symmetric(
            x in -150.0..-20.0f64, y in -300.0..300.0f64, z in -100.0..200.0f64
        ) {
            let p = p();
            let pose = PlatformPose::new(x, y, z);
            if let Ok(sols) = inverse_kinematics(&pose, &p) {
                prop_assert!(sols.len() <= 32);
                for s in &sols {
                    let mut twin = s.branch;
                    twin.sigma_1 = twin.sigma_1.flip();
                    if let Some(o) = sols.iter().find(|o| o.branch == twin) {
                        let mid = 0.5 * (s.input.y_a1 + o.input.y_a1);
                        prop_assert!((mid - (y + p.l3 / 2.0)).abs() < 1e-9);
                    }
                    let mut twin = s.branch;
                    twin.sigma_3 = twin.sigma_3.flip();
                    if let Some(o) = sols.iter().find(|o| o.branch == twin) {
                        prop_assert!((0.5 * (s.input.y_a3 + o.input.y_a3) - y).abs() < 1e-9);
                    }
                }
                let f = feasibility(&pose, &p);
                let all_positive = f.alpha_margin > 0.0 && f.beta_margin > 0.0
                    && f.branches.iter().all(|b| b.m.m1 > 0.0 && b.m.m3 > 0.0);
                prop_assert_eq!(all_positive, sols.len() == 32);
            }
        }
    }
}
