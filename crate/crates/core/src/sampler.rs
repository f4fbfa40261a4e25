use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fields::PhasePoint;

pub const DEFAULT_SEED: u64 = 42;

/// Seeded phase-space point cloud: `x` uniform in a box, `p` with a uniform
/// direction and log-uniform modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSampler {
    pub count: usize,
    pub seed: u64,
    pub p_range: (f64, f64),
    pub x_box: f64,
}

impl Default for PointSampler {
    fn default() -> Self {
        PointSampler {
            count: 100,
            seed: DEFAULT_SEED,
            p_range: (0.1, 10.0),
            x_box: 1.0,
        }
    }
}

impl PointSampler {
    pub fn new(count: usize, seed: u64) -> PointSampler {
        PointSampler {
            count,
            seed,
            ..Default::default()
        }
    }

    pub fn with_p_range(mut self, lo: f64, hi: f64) -> PointSampler {
        self.p_range = (lo, hi);
        self
    }

    pub fn with_x_box(mut self, half_width: f64) -> PointSampler {
        self.x_box = half_width;
        self
    }

    pub fn sample(&self, n: usize) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = (self.p_range.0.ln(), self.p_range.1.ln());
        (0..self.count)
            .map(|_| {
                let x: Vec<f64> = (0..n)
                    .map(|_| rng.gen_range(-self.x_box..=self.x_box))
                    .collect();
                let dir = random_unit(&mut rng, n);
                let r = if hi > lo { rng.gen_range(lo..hi).exp() } else { lo.exp() };
                PhasePoint::new(x, dir.into_iter().map(|d| d * r).collect())
            })
            .collect()
    }
}

/// Uniformly distributed unit vector in R^n.
pub fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn respects_ranges_and_seed() {
        let s = PointSampler::new(200, 7);
        let pts = s.sample(3);
        assert_eq!(pts.len(), 200);
        for q in &pts {
            assert!(q.x.iter().all(|v| v.abs() <= 1.0));
            let r = q.p_norm();
            assert!((0.1 - 1e-12..=10.0 + 1e-12).contains(&r));
        }
        assert_eq!(pts, s.sample(3));
        assert_ne!(pts, PointSampler::new(200, 8).sample(3));
    }
}
