//! Seeded random inputs and poses for harnesses and property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::singularity_margins;
use crate::fk::direct_kinematics;
use crate::ik::inverse_kinematics;
use crate::model::{ActuatorInput, MechanismParams, PlatformPose};

/// Rejection sampler in the reach box of one mechanism.
pub struct Sampler {
    rng: ChaCha8Rng,
    p: MechanismParams,
}

impl Sampler {
    pub fn new(p: MechanismParams, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Inputs with `|y_A1 - y_A2 - l3|` in `(0.02, 0.98) 2 l2` and `y_A3`
    /// within 0.98 `l6` of the platform `y`. Not necessarily assemblable.
    pub fn candidate_input(&mut self) -> ActuatorInput {
        let p = self.p;
        let y_mid = self.rng.gen_range(-p.a..p.a);
        let mag = self.rng.gen_range(0.02..0.98) * 2.0 * p.l2;
        let u = if self.rng.gen_bool(0.5) { mag } else { -mag };
        let y3 = y_mid + self.rng.gen_range(-0.98..0.98) * p.l6;
        ActuatorInput::new(y_mid + (u + p.l3) / 2.0, y_mid - (u + p.l3) / 2.0, y3)
    }

    /// An input with at least one real assembly whose discriminants all
    /// exceed `min_margin` after normalization.
    pub fn feasible_input(&mut self, min_margin: f64) -> ActuatorInput {
        loop {
            let q = self.candidate_input();
            let Ok(margins) = singularity_margins(&q, &self.p) else {
                continue;
            };
            let regular = margins
                .named()
                .iter()
                .all(|(_, m)| m.normalized.abs() > min_margin);
            if !regular {
                continue;
            }
            if matches!(direct_kinematics(&q, &self.p), Ok(s) if !s.is_empty()) {
                return q;
            }
        }
    }

    /// A pose in the reach box with at least one inverse solution.
    pub fn reachable_pose(&mut self) -> PlatformPose {
        let p = self.p;
        let (x_lo, x_hi) = x_range(&p);
        let z_lo = p.l1 - p.l2 - p.l4;
        let z_hi = p.l1 + p.l2 + p.l4;
        loop {
            let pose = PlatformPose::new(
                self.rng.gen_range(x_lo..x_hi),
                self.rng.gen_range(-p.a..p.a),
                self.rng.gen_range(z_lo..z_hi),
            );
            if inverse_kinematics(&pose, &p).is_ok() {
                return pose;
            }
        }
    }

    /// Uniform direction on the unit sphere.
    pub fn direction(&mut self) -> [f64; 3] {
        loop {
            let v: [f64; 3] = std::array::from_fn(|_| self.rng.gen_range(-1.0..1.0));
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 && n <= 1.0 {
                return v.map(|c| c / n);
            }
        }
    }
}

/// Platform x interval where both arccos arguments are in range.
pub fn x_range(p: &MechanismParams) -> (f64, f64) {
    let lo = (p.d - p.b - p.l4).max(p.b - p.d - p.l6);
    let hi = (p.d - p.b + p.l4).min(p.b - p.d + p.l6);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = MechanismParams::reference();
        let a: Vec<_> = {
            let mut s = Sampler::new(p, 7);
            (0..5).map(|_| s.feasible_input(1e-6)).collect()
        };
        let b: Vec<_> = {
            let mut s = Sampler::new(p, 7);
            (0..5).map(|_| s.feasible_input(1e-6)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn samples_are_solvable() {
        let p = MechanismParams::reference();
        let mut s = Sampler::new(p, 11);
        for _ in 0..20 {
            assert!(!direct_kinematics(&s.feasible_input(1e-6), &p).unwrap().is_empty());
            assert!(inverse_kinematics(&s.reachable_pose(), &p).is_ok());
        }
    }
}
