//! Randomized equivalence harness: closed-form solvers against the oracle,
//! plus round trips through both directions.

use rayon::prelude::*;
use serde::Serialize;

use crate::fk::{direct_kinematics, FkError, FkSolution};
use crate::ik::{inverse_kinematics, IkError, IkSolution};
use crate::model::{chain_points, closure_residuals, ActuatorInput, MechanismParams, PlatformPose};
use crate::oracle::{match_sets, oracle_direct, oracle_inverse, OracleSettings};
use crate::sampling::Sampler;

/// Position solver under test.
pub trait Solver: Sync {
    fn direct(&self, q: &ActuatorInput, p: &MechanismParams) -> Result<Vec<FkSolution>, FkError>;
    fn inverse(&self, pose: &PlatformPose, p: &MechanismParams) -> Result<Vec<IkSolution>, IkError>;
}

/// The closed-form solvers of this crate.
pub struct AnalyticSolver;

impl Solver for AnalyticSolver {
    fn direct(&self, q: &ActuatorInput, p: &MechanismParams) -> Result<Vec<FkSolution>, FkError> {
        direct_kinematics(q, p)
    }

    fn inverse(&self, pose: &PlatformPose, p: &MechanismParams) -> Result<Vec<IkSolution>, IkError> {
        inverse_kinematics(pose, p)
    }
}

/// Harness self-test fixture: shifts every direct solution along x.
pub struct PerturbedSolver {
    pub offset: f64,
}

impl Solver for PerturbedSolver {
    fn direct(&self, q: &ActuatorInput, p: &MechanismParams) -> Result<Vec<FkSolution>, FkError> {
        let mut sols = direct_kinematics(q, p)?;
        for s in &mut sols {
            s.pose.x += self.offset;
        }
        Ok(sols)
    }

    fn inverse(&self, pose: &PlatformPose, p: &MechanismParams) -> Result<Vec<IkSolution>, IkError> {
        inverse_kinematics(pose, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub oracle_samples: usize,
    pub round_trip_samples: usize,
    pub seed: u64,
    /// Matching distance, mm.
    pub tol: f64,
    /// Samples with a normalized discriminant below this are redrawn.
    pub min_margin: f64,
    pub oracle: OracleSettings,
}

impl ValidationConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            oracle_samples: samples,
            round_trip_samples: samples,
            seed,
            tol: 1e-6,
            min_margin: 1e-6,
            oracle: OracleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Check {
    FkVsOracle,
    IkVsOracle,
    /// `ik ∘ fk`: every direct solution maps back to a set containing the input.
    IkOfFk,
    /// `fk ∘ ik`: every inverse solution maps back to a set containing the pose.
    FkOfIk,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::FkVsOracle, Check::IkVsOracle, Check::IkOfFk, Check::FkOfIk];

    pub fn name(self) -> &'static str {
        match self {
            Check::FkVsOracle => "fk-vs-oracle",
            Check::IkVsOracle => "ik-vs-oracle",
            Check::IkOfFk => "ik-of-fk",
            Check::FkOfIk => "fk-of-ik",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub check: Check,
    pub sample: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check: Check,
    pub passed: usize,
    pub failed: usize,
    /// Largest matched distance, mm.
    pub worst: f64,
    /// Total number of compared set members.
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub checks: Vec<CheckSummary>,
    /// First mismatches in sample order, at most [`MAX_REPORTED`].
    pub mismatches: Vec<Mismatch>,
}

pub const MAX_REPORTED: usize = 20;

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn summary(&self, check: Check) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.check == check)
    }
}

struct Outcome {
    ok: bool,
    worst: f64,
    members: usize,
    detail: String,
}

fn sample_seed(seed: u64, stream: u64, i: usize) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn fk_vs_oracle(solver: &dyn Solver, q: &ActuatorInput, p: &MechanismParams, cfg: &ValidationConfig) -> Outcome {
    let closed: Vec<PlatformPose> = match solver.direct(q, p) {
        Ok(s) => s.iter().map(|s| s.pose).collect(),
        Err(e) => {
            return Outcome {
                ok: false,
                worst: f64::NAN,
                members: 0,
                detail: format!("input {q:?}: {e}"),
            }
        }
    };
    let found: Vec<PlatformPose> = oracle_direct(q, p, &cfg.oracle).iter().map(|o| o.pose).collect();
    let r = match_sets(&closed, &found, cfg.tol, |a, b| a.distance(b));
    Outcome {
        ok: r.is_perfect(),
        worst: r.max_distance,
        members: closed.len().max(found.len()),
        detail: format!(
            "input {:?}: {} closed-form vs {} oracle, unmatched {:?} / {:?}",
            q.to_array(),
            closed.len(),
            found.len(),
            r.unmatched_a,
            r.unmatched_b
        ),
    }
}

fn ik_vs_oracle(solver: &dyn Solver, pose: &PlatformPose, p: &MechanismParams, cfg: &ValidationConfig) -> Outcome {
    let closed: Vec<ActuatorInput> = solver
        .inverse(pose, p)
        .map(|s| s.iter().map(|s| s.input).collect())
        .unwrap_or_default();
    let found = oracle_inverse(pose, p, &cfg.oracle);
    let r = match_sets(&closed, &found, cfg.tol, |a, b| a.distance(b));
    Outcome {
        ok: r.is_perfect(),
        worst: r.max_distance,
        members: closed.len().max(found.len()),
        detail: format!(
            "pose {:?}: {} closed-form vs {} oracle, unmatched {:?} / {:?}",
            [pose.x, pose.y, pose.z],
            closed.len(),
            found.len(),
            r.unmatched_a,
            r.unmatched_b
        ),
    }
}

fn ik_of_fk(solver: &dyn Solver, q: &ActuatorInput, p: &MechanismParams, cfg: &ValidationConfig) -> Outcome {
    let sols = solver.direct(q, p).unwrap_or_default();
    let mut worst: f64 = 0.0;
    let mut ok = !sols.is_empty();
    let mut detail = String::new();
    for s in &sols {
        let back = solver.inverse(&s.pose, p).unwrap_or_default();
        let d = back
            .iter()
            .map(|r| r.input.distance(q))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        if !(d <= cfg.tol) {
            ok = false;
            detail = format!("input {:?}, branch {}: nearest recovered input at {d:e} mm", q.to_array(), s.branch);
        }
    }
    if sols.is_empty() {
        detail = format!("input {:?}: no direct solution", q.to_array());
    }
    Outcome {
        ok,
        worst,
        members: sols.len(),
        detail,
    }
}

fn fk_of_ik(solver: &dyn Solver, pose: &PlatformPose, p: &MechanismParams, cfg: &ValidationConfig) -> Outcome {
    let sols = solver.inverse(pose, p).unwrap_or_default();
    let mut worst: f64 = 0.0;
    let mut ok = !sols.is_empty();
    let mut detail = String::new();
    for r in &sols {
        let d = match solver.direct(&r.input, p) {
            Ok(back) => back
                .iter()
                .map(|s| s.pose.distance(pose))
                .fold(f64::INFINITY, f64::min),
            // loop 1 is a parallelogram here: check the closure of the
            // configuration reported by the inverse solver instead
            Err(FkError::SelfMotion) => {
                let closes = closure_residuals(&r.input, &r.cfg, p).scaled_norm(p) <= 1e-9;
                if closes {
                    chain_points(&r.input, &r.cfg, p).pose().distance(pose)
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(d);
        if !(d <= cfg.tol) {
            ok = false;
            detail = format!(
                "pose {:?}, mode {}: nearest recovered pose at {d:e} mm",
                [pose.x, pose.y, pose.z],
                r.branch
            );
        }
    }
    if sols.is_empty() {
        detail = format!("pose {:?}: unreachable", [pose.x, pose.y, pose.z]);
    }
    Outcome {
        ok,
        worst,
        members: sols.len(),
        detail,
    }
}

fn run_check(
    check: Check,
    solver: &dyn Solver,
    p: &MechanismParams,
    cfg: &ValidationConfig,
) -> (CheckSummary, Vec<Mismatch>) {
    let n = match check {
        Check::FkVsOracle | Check::IkVsOracle => cfg.oracle_samples,
        Check::IkOfFk | Check::FkOfIk => cfg.round_trip_samples,
    };
    let outcomes: Vec<Outcome> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sampler = Sampler::new(*p, sample_seed(cfg.seed, check as u64, i));
            match check {
                Check::FkVsOracle => fk_vs_oracle(solver, &sampler.feasible_input(cfg.min_margin), p, cfg),
                Check::IkVsOracle => ik_vs_oracle(solver, &sampler.reachable_pose(), p, cfg),
                Check::IkOfFk => ik_of_fk(solver, &sampler.feasible_input(cfg.min_margin), p, cfg),
                Check::FkOfIk => fk_of_ik(solver, &sampler.reachable_pose(), p, cfg),
            }
        })
        .collect();
    let mut summary = CheckSummary {
        check,
        passed: 0,
        failed: 0,
        worst: 0.0,
        members: 0,
    };
    let mut mismatches = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        summary.members += o.members;
        if o.worst.is_finite() {
            summary.worst = summary.worst.max(o.worst);
        }
        if o.ok {
            summary.passed += 1;
        } else {
            summary.failed += 1;
            mismatches.push(Mismatch {
                check,
                sample: i,
                detail: o.detail,
            });
        }
    }
    (summary, mismatches)
}

pub fn run_validation(solver: &dyn Solver, p: &MechanismParams, cfg: &ValidationConfig) -> ValidationReport {
    run_checks(solver, p, cfg, &Check::ALL)
}

pub fn run_checks(
    solver: &dyn Solver,
    p: &MechanismParams,
    cfg: &ValidationConfig,
    checks: &[Check],
) -> ValidationReport {
    let mut summaries = Vec::new();
    let mut mismatches = Vec::new();
    for &check in checks {
        let (s, m) = run_check(check, solver, p, cfg);
        summaries.push(s);
        mismatches.extend(m);
    }
    mismatches.truncate(MAX_REPORTED);
    ValidationReport {
        config: *cfg,
        checks: summaries,
        mismatches,
    }
}
