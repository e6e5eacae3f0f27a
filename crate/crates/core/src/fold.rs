//! Seeded straight-line paths that drive one discriminant to zero, sampled
//! on a ladder of margins. At each sample the two solutions that merge at the
//! zero are compared.
//!
//! Fold kinds of the direct problem walk in input space and pair the two
//! roots of one closed-form stage; the leg kinds walk in pose space and pair
//! the two slider roots of one leg.

use serde::Serialize;

use crate::analysis::{implicit_jacobian, singularity_margins};
use crate::fk::{solve_branch, FkBranch};
use crate::ik::{feasibility, inverse_kinematics, IkBranch};
use crate::model::{ActuatorInput, MechanismParams, PlatformPose};
use crate::sampling::Sampler;
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FoldKind {
    /// `D_gamma`, dimensionless.
    Gamma,
    /// `D_t = H2`, mm².
    T,
    /// `D_alpha = J1² + J2² - J3²`, mm⁴.
    Alpha,
    /// `M_i` of leg `i` (0-based), mm².
    Leg(usize),
}

impl FoldKind {
    pub const ALL: [FoldKind; 6] = [
        FoldKind::Gamma,
        FoldKind::T,
        FoldKind::Alpha,
        FoldKind::Leg(0),
        FoldKind::Leg(1),
        FoldKind::Leg(2),
    ];

    pub fn name(self) -> String {
        match self {
            FoldKind::Gamma => "D_gamma".into(),
            FoldKind::T => "D_t".into(),
            FoldKind::Alpha => "D_alpha".into(),
            FoldKind::Leg(i) => format!("M{}", i + 1),
        }
    }

    /// Fold of the direct problem, i.e. a parallel singularity.
    pub fn is_parallel(self) -> bool {
        !matches!(self, FoldKind::Leg(_))
    }
}

/// Solutions paired at a fold, with their distance and conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    /// Pose distance (direct kinds) or input distance (leg kinds), mm.
    pub separation: f64,
    /// Largest condition number of `J` over the pair.
    pub condition: f64,
    /// `det J` at the first member.
    pub determinant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldPoint {
    pub target: f64,
    /// Margin actually reached by bisection along the path.
    pub margin: f64,
    pub s: f64,
    pub pair: Option<PairSample>,
}

impl FoldPoint {
    /// The reached margin is within a factor two of the target.
    pub fn resolved(&self) -> bool {
        self.margin >= 0.5 * self.target && self.margin <= 2.0 * self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPath {
    pub kind: FoldKind,
    pub start: [f64; 3],
    pub direction: [f64; 3],
    /// Signs held fixed along the path, the paired sign shown as `*`.
    pub code: String,
    /// Path parameter at the zero of the margin.
    pub s_zero: f64,
    pub points: Vec<FoldPoint>,
}

/// Margin ladder: decades down to `1e-7`, then quarter decades to `1e-8`.
pub fn margin_ladder() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=7).map(|k| 10f64.powi(-k)).collect();
    v.extend((1..=4).map(|j| 1e-7 * 10f64.powf(-(j as f64) / 4.0)));
    v
}

#[derive(Debug, Clone, Copy)]
enum Pairing {
    Direct { base: FkBranch },
    Inverse { base: IkBranch },
}

struct Walk<'a> {
    kind: FoldKind,
    p: &'a MechanismParams,
    start: [f64; 3],
    dir: [f64; 3],
    pairing: Pairing,
}

fn at(start: [f64; 3], dir: [f64; 3], s: f64) -> [f64; 3] {
    std::array::from_fn(|k| start[k] + s * dir[k])
}

fn with_sign(code: FkBranch, kind: FoldKind, s: Sign) -> FkBranch {
    let mut c = code;
    match kind {
        FoldKind::Gamma => c.sigma_gamma = s,
        FoldKind::T => c.sigma_t = s,
        FoldKind::Alpha => c.sigma_alpha = s,
        FoldKind::Leg(_) => unreachable!("leg folds pair inverse solutions"),
    }
    c
}

fn with_leg_sign(code: IkBranch, leg: usize, s: Sign) -> IkBranch {
    let mut c = code;
    match leg {
        0 => c.sigma_1 = s,
        1 => c.sigma_2 = s,
        _ => c.sigma_3 = s,
    }
    c
}

impl Walk<'_> {
    fn margin(&self, s: f64) -> Option<f64> {
        let w = at(self.start, self.dir, s);
        match (self.kind, self.pairing) {
            (FoldKind::Leg(i), Pairing::Inverse { base }) => {
                let f = feasibility(&PlatformPose::new(w[0], w[1], w[2]), self.p);
                let b = f
                    .branches
                    .iter()
                    .find(|b| b.sigma_alpha == base.sigma_alpha && b.sigma_beta == base.sigma_beta)?;
                Some([b.m.m1, b.m.m2, b.m.m3][i])
            }
            (kind, Pairing::Direct { base }) => {
                let m = singularity_margins(&ActuatorInput::from_array(w), self.p).ok()?;
                match kind {
                    FoldKind::Gamma => Some(m.d_gamma.raw),
                    FoldKind::T => m
                        .d_t
                        .iter()
                        .find(|(g, _)| *g == base.sigma_gamma)
                        .map(|x| x.1.raw),
                    _ => m
                        .d_alpha
                        .iter()
                        .find(|(g, t, _)| *g == base.sigma_gamma && *t == base.sigma_t)
                        .map(|x| x.2.raw),
                }
            }
            _ => None,
        }
    }

    fn pair(&self, s: f64) -> Option<PairSample> {
        let w = at(self.start, self.dir, s);
        match self.pairing {
            Pairing::Direct { base } => {
                let q = ActuatorInput::from_array(w);
                let a = solve_branch(&q, with_sign(base, self.kind, Sign::Plus), self.p).ok()??;
                let b = solve_branch(&q, with_sign(base, self.kind, Sign::Minus), self.p).ok()??;
                let ja = implicit_jacobian(&q, &a.cfg, self.p).ok();
                let jb = implicit_jacobian(&q, &b.cfg, self.p).ok();
                let condition = match (ja, jb) {
                    (Some(x), Some(y)) => x.condition_number().max(y.condition_number()),
                    _ => f64::INFINITY,
                };
                Some(PairSample {
                    separation: a.pose.distance(&b.pose),
                    condition,
                    determinant: ja.map_or(0.0, |j| j.determinant()),
                })
            }
            Pairing::Inverse { base } => {
                let FoldKind::Leg(leg) = self.kind else {
                    return None;
                };
                let sols = inverse_kinematics(&PlatformPose::new(w[0], w[1], w[2]), self.p).ok()?;
                let find = |sign| {
                    let code = with_leg_sign(base, leg, sign);
                    sols.iter().find(|r| r.branch == code)
                };
                let (a, b) = (find(Sign::Plus)?, find(Sign::Minus)?);
                let ja = implicit_jacobian(&a.input, &a.cfg, self.p).ok();
                let jb = implicit_jacobian(&b.input, &b.cfg, self.p).ok();
                let condition = match (ja, jb) {
                    (Some(x), Some(y)) => x.condition_number().max(y.condition_number()),
                    _ => f64::INFINITY,
                };
                Some(PairSample {
                    separation: a.input.distance(&b.input),
                    condition,
                    determinant: ja.map_or(0.0, |j| j.determinant()),
                })
            }
        }
    }

    /// Largest `s` in `[lo, hi]` with `margin(s) > level`, given
    /// `margin(lo) > level >= margin(hi)`.
    fn bisect(&self, mut lo: f64, mut hi: f64, level: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.margin(mid) {
                Some(m) if m > level => lo = mid,
                _ => hi = mid,
            }
        }
        lo
    }

    /// Scans outward for the first sign change of the margin with the pair
    /// present on the whole approach. Returns `(last regular s, zero s)`.
    fn find_zero(&self, step: f64, steps: usize) -> Option<(f64, f64)> {
        self.pair(0.0)?;
        if self.margin(0.0)? <= 0.0 {
            return None;
        }
        let mut prev = 0.0;
        for k in 1..=steps {
            let s = k as f64 * step;
            let m = self.margin(s);
            match m {
                Some(m) if m > 0.0 => {
                    self.pair(s)?;
                    prev = s;
                }
                Some(_) => {
                    let zero = self.bisect(prev, s, 0.0);
                    return Some((prev, zero));
                }
                None => return None,
            }
        }
        None
    }
}

fn direct_codes() -> Vec<FkBranch> {
    FkBranch::all().collect()
}

fn inverse_codes() -> Vec<IkBranch> {
    let mut v = Vec::new();
    for sa in Sign::BOTH {
        for sb in Sign::BOTH {
            for s in Sign::BOTH {
                for t in Sign::BOTH {
                    for u in Sign::BOTH {
                        v.push(IkBranch {
                            sigma_alpha: sa,
                            sigma_beta: sb,
                            sigma_1: s,
                            sigma_2: t,
                            sigma_3: u,
                        });
                    }
                }
            }
        }
    }
    v
}

fn code_label(pairing: Pairing, kind: FoldKind) -> String {
    match pairing {
        Pairing::Direct { base } => {
            let mut s: Vec<char> = base.to_string().chars().collect();
            let idx = match kind {
                FoldKind::Gamma => 0,
                FoldKind::T => 1,
                _ => 2,
            };
            s[idx] = '*';
            s.into_iter().collect()
        }
        Pairing::Inverse { base } => {
            let mut s: Vec<char> = base.to_string().chars().filter(|c| matches!(c, '+' | '-')).collect();
            if let FoldKind::Leg(i) = kind {
                s[2 + i] = '*';
            }
            s.into_iter().collect()
        }
    }
}

/// `count` seeded paths for one kind. Attempts are bounded; fewer paths are
/// returned if the sampler cannot find enough clean crossings.
pub fn fold_paths(kind: FoldKind, p: &MechanismParams, seed: u64, count: usize) -> Vec<FoldPath> {
    let mut sampler = Sampler::new(*p, seed);
    let scale = p.length_scale();
    let step = scale / 256.0;
    let steps = 2048;
    let mut out = Vec::new();
    for _ in 0..200 * count.max(1) {
        if out.len() >= count {
            break;
        }
        let start = match kind {
            FoldKind::Leg(_) => {
                let pose = sampler.reachable_pose();
                [pose.x, pose.y, pose.z]
            }
            _ => sampler.feasible_input(1e-3).to_array(),
        };
        let dir = sampler.direction();
        let pairings: Vec<Pairing> = match kind {
            FoldKind::Leg(_) => inverse_codes()
                .into_iter()
                .filter(|c| match kind {
                    FoldKind::Leg(i) => [c.sigma_1, c.sigma_2, c.sigma_3][i] == Sign::Plus,
                    _ => false,
                })
                .map(|base| Pairing::Inverse { base })
                .collect(),
            _ => direct_codes()
                .into_iter()
                .filter(|c| with_sign(*c, kind, Sign::Plus) == *c)
                .map(|base| Pairing::Direct { base })
                .collect(),
        };
        for pairing in pairings {
            let walk = Walk {
                kind,
                p,
                start,
                dir,
                pairing,
            };
            let Some((regular, zero)) = walk.find_zero(step, steps) else {
                continue;
            };
            let Some(m_regular) = walk.margin(regular) else {
                continue;
            };
            let mut points = Vec::new();
            let mut lo = regular;
            for target in margin_ladder() {
                if target >= m_regular {
                    continue;
                }
                let s = walk.bisect(lo, zero, target);
                lo = s;
                points.push(FoldPoint {
                    target,
                    margin: walk.margin(s).unwrap_or(f64::NAN),
                    s,
                    pair: walk.pair(s),
                });
            }
            out.push(FoldPath {
                kind,
                start,
                direction: dir,
                code: code_label(pairing, kind),
                s_zero: zero,
                points,
            });
            break;
        }
    }
    out
}

/// Outcome of the fold checks on one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldVerdict {
    /// Every ladder point of the final decade reached its target margin.
    pub resolved: bool,
    /// Separation never increases over the final decade.
    pub monotone: bool,
    /// Separation at the smallest ladder margin.
    pub final_separation: f64,
    pub final_margin: f64,
    /// Smallest condition number over points with margin `<= cond_margin`,
    /// `None` if the ladder never got that low.
    pub min_condition: Option<f64>,
}

impl FoldPath {
    pub fn final_decade(&self) -> Vec<&FoldPoint> {
        self.points.iter().filter(|pt| pt.target <= 1e-7 * 1.000_001).collect()
    }

    pub fn verdict(&self, cond_margin: f64) -> FoldVerdict {
        let tail = self.final_decade();
        let resolved = tail.len() == 5 && tail.iter().all(|pt| pt.resolved() && pt.pair.is_some());
        let seps: Vec<f64> = tail
            .iter()
            .map(|pt| pt.pair.map_or(f64::NAN, |x| x.separation))
            .collect();
        let monotone = seps.len() >= 2 && seps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let last = tail.last();
        let min_condition = self
            .points
            .iter()
            .filter(|pt| pt.margin <= cond_margin * 1.000_001)
            .filter_map(|pt| pt.pair.map(|x| x.condition))
            .reduce(f64::min);
        FoldVerdict {
            resolved,
            monotone,
            final_separation: last.and_then(|pt| pt.pair).map_or(f64::NAN, |x| x.separation),
            final_margin: last.map_or(f64::NAN, |pt| pt.margin),
            min_condition,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_shape() {
        let l = margin_ladder();
        assert_eq!(l.len(), 11);
        assert!((l[10] - 1e-8).abs() < 1e-22);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn leg_three_pair_closes_like_a_square_root() {
        let p = MechanismParams::reference();
        let paths = fold_paths(FoldKind::Leg(2), &p, 5, 1);
        assert_eq!(paths.len(), 1);
        for pt in &paths[0].points {
            let sep = pt.pair.unwrap().separation;
            // slider pair is y_C3 ± √M3
            assert!((sep - 2.0 * pt.margin.sqrt()).abs() < 1e-6 * (1.0 + sep));
        }
    }

    #[test]
    fn gamma_pair_separation_shrinks() {
        let p = MechanismParams::reference();
        let paths = fold_paths(FoldKind::Gamma, &p, 5, 1);
        assert_eq!(paths.len(), 1);
        let seps: Vec<f64> = paths[0].points.iter().map(|pt| pt.pair.unwrap().separation).collect();
        assert!(seps.windows(2).all(|w| w[1] < w[0]));
    }
}
