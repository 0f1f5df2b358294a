//! Seeded instance generators shared by the integration suites. All
//! draws go through ChaCha8 so every suite is reproducible bit for bit.
#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use weakot_core::classical_ot;
use weakot_core::measures::{Coupling, DiscreteMeasure};

pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }

    pub fn point(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.range(-1.0, 1.0)).collect()
    }

    /// A measure with between `lo` and `hi` atoms inclusive.
    pub fn measure_sized(&mut self, lo: usize, hi: usize, d: usize) -> DiscreteMeasure {
        let n = lo + self.index(hi - lo + 1);
        self.measure(n, d)
    }

    /// `n` atoms in [-1, 1]^d with weights bounded away from zero, so
    /// conditional kernels stay well scaled.
    pub fn measure(&mut self, n: usize, d: usize) -> DiscreteMeasure {
        let points = (0..n).map(|_| self.point(d)).collect();
        let raw: Vec<f64> = (0..n).map(|_| 0.5 + self.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        DiscreteMeasure::new(points, weights).expect("generated measure is valid")
    }

    /// A feasible coupling in the interior-ish of the polytope: a
    /// mixture of the product plan and two vertices optimal for random
    /// linear costs.
    pub fn coupling(&mut self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Coupling {
        let product = Coupling::product(mu.clone(), nu.clone());
        let mut parts: Vec<Vec<Vec<f64>>> = vec![product.matrix().to_vec()];
        for _ in 0..2 {
            let cost: Vec<Vec<f64>> = (0..mu.len())
                .map(|_| (0..nu.len()).map(|_| self.range(-1.0, 1.0)).collect())
                .collect();
            let vertex = classical_ot::solve(&cost, mu, nu).expect("oracle solves random costs");
            parts.push(vertex.coupling().matrix().to_vec());
        }
        let raw: Vec<f64> = (0..parts.len()).map(|_| 0.05 + self.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let mut matrix = vec![vec![0.0; nu.len()]; mu.len()];
        for (part, &w) in parts.iter().zip(&raw) {
            for (row, out) in part.iter().zip(matrix.iter_mut()) {
                for (&q, o) in row.iter().zip(out.iter_mut()) {
                    *o += q * (w / total);
                }
            }
        }
        Coupling::new(mu.clone(), nu.clone(), matrix).expect("mixture of couplings is a coupling")
    }

    /// Potential values in [-1, 1].
    pub fn values(&mut self, m: usize) -> Vec<f64> {
        (0..m).map(|_| self.range(-1.0, 1.0)).collect()
    }
}
