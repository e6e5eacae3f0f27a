//! Brute-force assembly finder used to check the closed-form solvers.
//!
//! The oracle only evaluates [`chain_points`] and [`closure_residuals`]; it
//! never uses the closed-form root formulas. Loop 1 is a smooth periodic
//! function of `gamma` alone, so its roots come from a 1-D sign-change scan.
//! For each `gamma`, the x-chain residual is inverted for `beta` at every
//! sampled `alpha`, which leaves the leg-3 residual as a 1-D function along
//! the closed curve of x-chain solutions. Brackets are refined by bisection
//! and the full 3-D residual is polished by damped Newton.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    chain_points, closure_residuals, ActuatorInput, InternalConfig, MechanismParams, PlatformPose,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid_n must be at least 16 (got {0})")]
    GridTooCoarse(usize),
    #[error("tolerances must be positive")]
    NonPositiveTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    /// Samples per scanned dimension.
    pub grid_n: usize,
    /// Newton polish iterations.
    pub newton_iters: usize,
    /// Distance below which two roots are the same, mm.
    pub cluster_tol: f64,
    /// Acceptance threshold on the dimensionless residual norm.
    pub residual_tol: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            newton_iters: 50,
            cluster_tol: 1e-6,
            residual_tol: 1e-10,
        }
    }
}

impl OracleSettings {
    pub fn new(
        grid_n: usize,
        newton_iters: usize,
        cluster_tol: f64,
        residual_tol: f64,
    ) -> Result<Self, OracleError> {
        if grid_n < 16 {
            return Err(OracleError::GridTooCoarse(grid_n));
        }
        if !(cluster_tol > 0.0 && residual_tol > 0.0) {
            return Err(OracleError::NonPositiveTolerance);
        }
        Ok(Self {
            grid_n,
            newton_iters,
            cluster_tol,
            residual_tol,
        })
    }
}

/// One assembly found by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleAssembly {
    pub pose: PlatformPose,
    pub cfg: InternalConfig,
    /// Found as a local minimum touching zero rather than a sign change.
    pub tangent: bool,
}

// ---------------------------------------------------------------------------
// 1-D root isolation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Root1 {
    x: f64,
    tangent: bool,
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes `f` on `[lo, hi]` by golden-section search.
fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// All roots of a continuous `f` on an increasing sample run.
///
/// Sign changes are bisected. Interior samples that are a local extremum
/// towards zero get a golden-section search: a crossing there means a pair
/// of close roots, a minimum within `touch_tol` is a tangent root.
fn roots_on_run(f: &dyn Fn(f64) -> f64, xs: &[f64], fs: &[f64], touch_tol: f64) -> Vec<Root1> {
    let mut out = Vec::new();
    let n = xs.len();
    for i in 0..n.saturating_sub(1) {
        if fs[i] == 0.0 {
            out.push(Root1 {
                x: xs[i],
                tangent: false,
            });
        } else if fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0) {
            out.push(Root1 {
                x: bisect(f, xs[i], xs[i + 1], fs[i]),
                tangent: false,
            });
        }
    }
    if n > 0 && fs[n - 1] == 0.0 {
        out.push(Root1 {
            x: xs[n - 1],
            tangent: false,
        });
    }
    for i in 1..n.saturating_sub(1) {
        let s = fs[i].signum();
        if s == 0.0 || fs[i - 1].signum() != s || fs[i + 1].signum() != s {
            continue;
        }
        let (a, b, c) = (s * fs[i - 1], s * fs[i], s * fs[i + 1]);
        if !(b < a && b <= c) {
            continue;
        }
        let g = |x: f64| s * f(x);
        let xm = golden_min(&g, xs[i - 1], xs[i + 1]);
        let fm = g(xm);
        if fm < 0.0 {
            out.push(Root1 {
                x: bisect(f, xs[i - 1], xm, fs[i - 1]),
                tangent: false,
            });
            out.push(Root1 {
                x: bisect(f, xm, xs[i + 1], f(xm)),
                tangent: false,
            });
        } else if fm <= touch_tol {
            out.push(Root1 {
                x: xm,
                tangent: true,
            });
        }
    }
    out
}

/// Periodic scan over one turn; the run is padded by one sample on each side
/// so crossings and minima at the seam are seen. Duplicates are expected.
fn periodic_roots(f: &dyn Fn(f64) -> f64, n: usize, touch_tol: f64) -> Vec<Root1> {
    let step = 2.0 * PI / n as f64;
    let xs: Vec<f64> = (-1..=n as i64)
        .map(|i| -PI + (i as f64 + 0.5) * step)
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    roots_on_run(f, &xs, &fs, touch_tol)
}

// ---------------------------------------------------------------------------
// Residual polish
// ---------------------------------------------------------------------------

fn scaled_residual(input: &ActuatorInput, v: &Vector3<f64>, p: &MechanismParams) -> Vector3<f64> {
    let cfg = InternalConfig::new(v[0], v[1], v[2], p);
    Vector3::from(closure_residuals(input, &cfg, p).scaled(p))
}

/// Damped Newton on the dimensionless residual with a central-difference
/// Jacobian. Steps that do not reduce the norm are halved.
fn polish(input: &ActuatorInput, start: Vector3<f64>, p: &MechanismParams, iters: usize) -> Vector3<f64> {
    let mut v = start;
    let mut r = scaled_residual(input, &v, p);
    let h = 1e-7;
    for _ in 0..iters {
        let norm = r.norm();
        if norm < 1e-15 {
            break;
        }
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut plus = v;
            let mut minus = v;
            plus[j] += h;
            minus[j] -= h;
            let col = (scaled_residual(input, &plus, p) - scaled_residual(input, &minus, p)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let Some(step) = jac.lu().solve(&(-r)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = v + lambda * step;
            let rt = scaled_residual(input, &trial, p);
            if rt.norm() < norm {
                v = trial;
                r = rt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Direct problem
// ---------------------------------------------------------------------------

struct Loop2Scan<'a> {
    input: &'a ActuatorInput,
    p: &'a MechanismParams,
    gamma: f64,
}

impl Loop2Scan<'_> {
    /// `cos β` that zeroes the x-chain residual at this `alpha`.
    fn cos_beta(&self, alpha: f64) -> f64 {
        // xchain(α, β) = xchain(α, π/2) - l6 cos β
        let at_quarter = closure_residuals(
            self.input,
            &InternalConfig::new(self.gamma, alpha, PI / 2.0, self.p),
            self.p,
        )
        .xchain;
        at_quarter / self.p.l6
    }

    fn cos_alpha(&self, beta: f64) -> f64 {
        // xchain(α, β) = xchain(π/2, β) + l4 cos α
        let at_quarter = closure_residuals(
            self.input,
            &InternalConfig::new(self.gamma, PI / 2.0, beta, self.p),
            self.p,
        )
        .xchain;
        -at_quarter / self.p.l4
    }

    fn leg3(&self, alpha: f64, beta: f64) -> f64 {
        closure_residuals(self.input, &InternalConfig::new(self.gamma, alpha, beta, self.p), self.p)
            .loop2
    }

    fn on_branch(&self, alpha: f64, sigma: f64) -> Option<f64> {
        let c = self.cos_beta(alpha);
        (c.abs() <= 1.0).then(|| self.leg3(alpha, sigma * c.acos()))
    }
}

/// Maximal cyclic runs of valid sample indices.
fn cyclic_runs(valid: &[bool]) -> Vec<Vec<usize>> {
    let n = valid.len();
    if valid.iter().all(|&v| v) {
        return vec![(0..n).collect()];
    }
    let Some(start) = (0..n).find(|&i| !valid[i]) else {
        return Vec::new();
    };
    let mut runs = Vec::new();
    let mut current = Vec::new();
    for k in 1..=n {
        let i = (start + k) % n;
        if valid[i] {
            current.push(i);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn loop2_candidates(scan: &Loop2Scan<'_>, n: usize, touch_tol: f64) -> Vec<(f64, f64, bool)> {
    let step = 2.0 * PI / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| -PI + (i as f64 + 0.5) * step).collect();
    let valid: Vec<bool> = grid.iter().map(|&a| scan.cos_beta(a).abs() <= 1.0).collect();
    let runs = cyclic_runs(&valid);
    let full_turn = runs.len() == 1 && runs[0].len() == n;
    let mut out = Vec::new();

    for run in &runs {
        // unwrap the run into increasing alpha
        let mut xs: Vec<f64> = Vec::with_capacity(run.len() + 2);
        let mut offset = 0.0;
        for (k, &i) in run.iter().enumerate() {
            if k > 0 && i < run[k - 1] {
                offset += 2.0 * PI;
            }
            xs.push(grid[i] + offset);
        }
        if full_turn {
            xs.insert(0, xs[0] - step);
            xs.push(xs[xs.len() - 1] + step);
        }
        for sigma in [1.0, -1.0] {
            let f = |a: f64| scan.on_branch(a, sigma).unwrap_or(f64::NAN);
            let fs: Vec<f64> = xs.iter().map(|&a| f(a)).collect();
            for r in roots_on_run(&f, &xs, &fs, touch_tol) {
                let c = scan.cos_beta(r.x).clamp(-1.0, 1.0);
                out.push((r.x, sigma * c.acos(), r.tangent));
            }
        }
        if full_turn {
            continue;
        }
        // the two branches meet beyond each end of the run, at sin β = 0
        let ends = if run.len() == 1 {
            vec![xs[0]]
        } else {
            vec![xs[0], xs[xs.len() - 1]]
        };
        for alpha_end in ends {
            let alpha_end = crate::model::normalize_angle(alpha_end);
            let c = scan.cos_beta(alpha_end).clamp(-1.0, 1.0);
            let b = c.acos();
            let (lo, hi) = if c > 0.0 { (-b, b) } else { (b, 2.0 * PI - b) };
            let side = if alpha_end < 0.0 { -1.0 } else { 1.0 };
            let g = |beta: f64| {
                let ca = scan.cos_alpha(beta).clamp(-1.0, 1.0);
                scan.leg3(side * ca.acos(), beta)
            };
            let (g_lo, g_hi) = (g(lo), g(hi));
            if g_lo != 0.0 && g_hi != 0.0 && (g_lo < 0.0) != (g_hi < 0.0) {
                let beta = bisect(&g, lo, hi, g_lo);
                let ca = scan.cos_alpha(beta).clamp(-1.0, 1.0);
                out.push((side * ca.acos(), beta, false));
            }
        }
    }
    out
}

pub fn oracle_direct(
    input: &ActuatorInput,
    p: &MechanismParams,
    s: &OracleSettings,
) -> Vec<OracleAssembly> {
    let loop1 = |g: f64| closure_residuals(input, &InternalConfig::new(g, 0.0, 0.0, p), p).loop1;
    let l2sq = p.l2 * p.l2;
    let l6sq = p.l6 * p.l6;

    // an identically vanishing loop-1 residual is a self-motion: no isolated roots
    let step = 2.0 * PI / s.grid_n as f64;
    let identically_zero = (0..s.grid_n)
        .all(|i| loop1(-PI + (i as f64 + 0.5) * step).abs() <= s.residual_tol * l2sq);
    if identically_zero {
        return Vec::new();
    }

    let mut gammas = periodic_roots(&loop1, s.grid_n, s.residual_tol * l2sq);
    gammas.iter_mut().for_each(|r| r.x = crate::model::normalize_angle(r.x));
    gammas.sort_by(|a, b| a.x.total_cmp(&b.x));
    gammas.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12);

    let mut found = Vec::new();
    for g in &gammas {
        let scan = Loop2Scan {
            input,
            p,
            gamma: g.x,
        };
        for (alpha, beta, tangent) in loop2_candidates(&scan, s.grid_n, s.residual_tol * l6sq) {
            let v = polish(input, Vector3::new(g.x, alpha, beta), p, s.newton_iters);
            let cfg = InternalConfig::new(v[0], v[1], v[2], p);
            let residuals = closure_residuals(input, &cfg, p);
            if residuals.scaled_norm(p) > s.residual_tol {
                continue;
            }
            found.push(OracleAssembly {
                pose: chain_points(input, &cfg, p).pose(),
                cfg,
                tangent: tangent || g.tangent,
            });
        }
    }
    found.sort_by(|a, b| {
        a.cfg
            .gamma
            .total_cmp(&b.cfg.gamma)
            .then(a.cfg.alpha.total_cmp(&b.cfg.alpha))
    });
    let scale = p.length_scale();
    let mut clustered: Vec<OracleAssembly> = Vec::new();
    for a in found {
        let dup = clustered.iter().any(|c| {
            c.pose.distance(&a.pose) <= s.cluster_tol
                && scale * c.cfg.angle_distance(&a.cfg) <= s.cluster_tol
        });
        if !dup {
            clustered.push(a);
        }
    }
    clustered
}

// ---------------------------------------------------------------------------
// Inverse problem
// ---------------------------------------------------------------------------

/// Joint centres C1, C2, C3 walked back from a platform position.
fn upper_points(pose: &PlatformPose, alpha: f64, beta: f64, p: &MechanismParams) -> [Vector3<f64>; 3] {
    let o = pose.to_vector();
    let d2 = o - Vector3::new(p.d, 0.0, 0.0);
    let d1 = d2 - p.l4 * Vector3::new(alpha.cos(), 0.0, alpha.sin());
    let half = Vector3::new(0.0, p.l3 / 2.0, 0.0);
    let f3 = o + Vector3::new(p.d, 0.0, 0.0);
    let e3 = f3 - Vector3::new(0.0, 0.0, p.l8);
    let d3 = e3 - p.l6 * Vector3::new(beta.cos(), 0.0, beta.sin());
    let c3 = d3 - Vector3::new(0.0, 0.0, p.l7);
    [d1 + half, d1 - half, c3]
}

fn polish_1d(f: &dyn Fn(f64) -> f64, mut x: f64, iters: usize) -> f64 {
    let h = 1e-7 * (1.0 + x.abs());
    for _ in 0..iters {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        let slope = (f(x + h) - f(x - h)) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - fx / slope;
        if f(next).abs() >= fx.abs() {
            break;
        }
        x = next;
    }
    x
}

fn angle_roots(f: &dyn Fn(f64) -> f64, s: &OracleSettings, touch_tol: f64) -> Vec<f64> {
    let mut roots: Vec<f64> = periodic_roots(f, s.grid_n, touch_tol)
        .into_iter()
        .map(|r| crate::model::normalize_angle(polish_1d(f, r.x, s.newton_iters)))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if roots.len() > 1 && (roots[0] + PI).abs() < 1e-9 && (roots[roots.len() - 1] - PI).abs() < 1e-9 {
        roots.remove(0);
    }
    roots
}

pub fn oracle_inverse(
    pose: &PlatformPose,
    p: &MechanismParams,
    s: &OracleSettings,
) -> Vec<ActuatorInput> {
    // platform x as reached through link D1D2 from the loop-1 plane x = -b
    let x_through_alpha = |a: f64| upper_points(pose, a, 0.0, p)[0].x + p.b;
    // D3 must sit in the plane x = b of leg 3
    let x_through_beta = |b: f64| upper_points(pose, 0.0, b, p)[2].x - p.b;
    let alphas = angle_roots(&x_through_alpha, s, 1e-12 * p.l4);
    let betas = angle_roots(&x_through_beta, s, 1e-12 * p.l6);

    let legs = [(-p.b, p.l2), (-p.b, p.l2), (p.b, p.l6)];
    let mut out = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            let c = upper_points(pose, alpha, beta, p);
            let per_leg: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    let (x_slider, len) = legs[i];
                    let ci = c[i];
                    let f = |y: f64| (ci - Vector3::new(x_slider, y, p.l1)).norm_squared() - len * len;
                    let lo = ci.y - 1.05 * len;
                    let hi = ci.y + 1.05 * len;
                    let xs: Vec<f64> = (0..s.grid_n)
                        .map(|k| lo + (hi - lo) * k as f64 / (s.grid_n - 1) as f64)
                        .collect();
                    let fs: Vec<f64> = xs.iter().map(|&y| f(y)).collect();
                    let mut ys: Vec<f64> = roots_on_run(&f, &xs, &fs, s.residual_tol * len * len)
                        .into_iter()
                        .map(|r| polish_1d(&f, r.x, s.newton_iters))
                        .collect();
                    ys.sort_by(f64::total_cmp);
                    ys.dedup_by(|a, b| (*a - *b).abs() <= s.cluster_tol);
                    ys
                })
                .collect();
            for &y1 in &per_leg[0] {
                for &y2 in &per_leg[1] {
                    for &y3 in &per_leg[2] {
                        out.push(ActuatorInput::new(y1, y2, y3));
                    }
                }
            }
        }
    }
    let mut clustered: Vec<ActuatorInput> = Vec::new();
    for q in out {
        if !clustered.iter().any(|c| c.distance(&q) <= s.cluster_tol) {
            clustered.push(q);
        }
    }
    clustered
}

// ---------------------------------------------------------------------------
// Set matching
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    /// `(index in a, index in b, distance)` for accepted pairs.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    pub max_distance: f64,
}

impl MatchReport {
    pub fn is_perfect(&self) -> bool {
        self.unmatched_a.is_empty() && self.unmatched_b.is_empty()
    }
}

/// Minimum-cost assignment for a cost matrix with `rows <= cols`.
/// Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based potentials; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Optimal one-to-one matching minimizing the total distance. Assigned pairs
/// further apart than `tol` count as unmatched on both sides.
pub fn match_sets<T>(a: &[T], b: &[T], tol: f64, dist: impl Fn(&T, &T) -> f64) -> MatchReport {
    let transpose = a.len() > b.len();
    let (rows, cols) = if transpose { (b, a) } else { (a, b) };
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| dist(r, c)).collect())
        .collect();
    let assignment = hungarian(&cost);

    let mut pairs = Vec::new();
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    for (r, &c) in assignment.iter().enumerate() {
        let d = cost[r][c];
        if d > tol {
            continue;
        }
        let (ia, ib) = if transpose { (c, r) } else { (r, c) };
        used_a[ia] = true;
        used_b[ib] = true;
        pairs.push((ia, ib, d));
    }
    pairs.sort_by_key(|&(ia, _, _)| ia);
    let max_distance = pairs.iter().map(|&(_, _, d)| d).fold(0.0, f64::max);
    MatchReport {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&i| !used_b[i]).collect(),
        max_distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::direct_kinematics;
    use crate::ik::inverse_kinematics;

    const TABLE_INPUT: ActuatorInput = ActuatorInput::new(350.0, -300.0, -25.0);

    fn p() -> MechanismParams {
        MechanismParams::reference()
    }

    #[test]
    fn settings_validation() {
        assert!(OracleSettings::new(8, 50, 1e-6, 1e-10).is_err());
        assert!(OracleSettings::new(64, 50, 0.0, 1e-10).is_err());
        assert!(OracleSettings::new(64, 50, 1e-6, 1e-10).is_ok());
    }

    #[test]
    fn gamma_roots_for_reference_input() {
        let sols = oracle_direct(&TABLE_INPUT, &p(), &OracleSettings::default());
        assert!(!sols.is_empty());
        for s in &sols {
            assert!((s.cfg.gamma.cos() + 0.910_714_285_714_285_7).abs() < 1e-9);
        }
    }

    #[test]
    fn reference_input_matches_closed_form() {
        let p = p();
        let oracle = oracle_direct(&TABLE_INPUT, &p, &OracleSettings::default());
        let closed: Vec<PlatformPose> = direct_kinematics(&TABLE_INPUT, &p)
            .unwrap()
            .iter()
            .map(|s| s.pose)
            .collect();
        let found: Vec<PlatformPose> = oracle.iter().map(|o| o.pose).collect();
        let report = match_sets(&closed, &found, 1e-6, |a, b| a.distance(b));
        assert!(report.is_perfect(), "{report:?}");
        assert_eq!(found.len(), 8);
    }

    #[test]
    fn loop_one_out_of_reach_is_empty() {
        let q = ActuatorInput::new(900.0, -900.0, 0.0);
        assert!(oracle_direct(&q, &p(), &OracleSettings::default()).is_empty());
    }

    #[test]
    fn self_motion_is_empty() {
        let q = ActuatorInput::new(350.0, 210.0, -25.0);
        assert!(oracle_direct(&q, &p(), &OracleSettings::default()).is_empty());
    }

    #[test]
    fn refining_the_grid_keeps_roots() {
        let p = p();
        let corpus = [
            TABLE_INPUT,
            ActuatorInput::new(100.0, -200.0, 40.0),
            ActuatorInput::new(-50.0, -400.0, -300.0),
        ];
        for q in corpus {
            let coarse: Vec<_> = oracle_direct(&q, &p, &OracleSettings::new(256, 50, 1e-6, 1e-10).unwrap())
                .iter()
                .map(|o| o.pose)
                .collect();
            let fine: Vec<_> = oracle_direct(&q, &p, &OracleSettings::new(512, 50, 1e-6, 1e-10).unwrap())
                .iter()
                .map(|o| o.pose)
                .collect();
            let report = match_sets(&coarse, &fine, 1e-6, |a, b| a.distance(b));
            assert!(report.unmatched_a.is_empty());
        }
    }

    #[test]
    fn inverse_oracle_recovers_reference_input() {
        let p = p();
        for s in direct_kinematics(&TABLE_INPUT, &p).unwrap() {
            let qs = oracle_inverse(&s.pose, &p, &OracleSettings::default());
            assert!(qs.iter().any(|q| q.distance(&TABLE_INPUT) < 1e-6));
            let closed: Vec<_> = inverse_kinematics(&s.pose, &p)
                .unwrap()
                .iter()
                .map(|r| r.input)
                .collect();
            let report = match_sets(&closed, &qs, 1e-6, |a, b| a.distance(b));
            assert!(report.is_perfect(), "{report:?}");
        }
    }

    #[test]
    fn inverse_oracle_unreachable_is_empty() {
        let p = p();
        let far = PlatformPose::new(10.0 * p.l4, 0.0, 0.0);
        assert!(oracle_inverse(&far, &p, &OracleSettings::default()).is_empty());
    }

    #[test]
    fn matching_identical_and_missing() {
        let a = [1.0, 5.0, 9.0];
        let r = match_sets(&a, &a, 1e-9, |x: &f64, y: &f64| (x - y).abs());
        assert!(r.is_perfect());
        assert_eq!(r.max_distance, 0.0);
        let b = [9.0, 1.0];
        let r = match_sets(&a, &b, 1e-9, |x: &f64, y: &f64| (x - y).abs());
        assert_eq!(r.unmatched_a, vec![1]);
        assert!(r.unmatched_b.is_empty());
    }

    fn brute_min(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..cost[0].len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] + brute_min(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn hungarian_is_optimal(
            rows in 1usize..5,
            extra in 0usize..3,
            seed in proptest::collection::vec(0.0f64..100.0, 64),
        ) {
            let cols = rows + extra;
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| seed[i * 8 + j]).collect())
                .collect();
            let assignment = hungarian(&cost);
            let mut seen = assignment.clone();
            seen.sort();
            seen.dedup();
            proptest::prop_assert_eq!(seen.len(), rows);
            let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let best = brute_min(&cost, 0, &mut vec![false; cols]);
            proptest::prop_assert!((total - best).abs() < 1e-9);
        }
    }
}
