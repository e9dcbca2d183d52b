//! Reference computations written independently of the library.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rsma_ee::scenario::{PowerModel, Scenario};

/// Closed-form single-antenna model with unit noise and unit bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct ScalarModel {
    pub g: [f64; 2],
    pub eta: f64,
    pub p_cir: f64,
    pub p_t: f64,
}

fn log2p(x: f64) -> f64 {
    (1.0 + x).log2()
}

impl ScalarModel {
    pub fn power(&self, total: f64) -> f64 {
        total / self.eta + self.p_cir
    }

    pub fn sdma_wsr(&self, u: [f64; 2], p: [f64; 2]) -> f64 {
        let r1 = log2p(self.g[0] * p[0] / (self.g[0] * p[1] + 1.0));
        let r2 = log2p(self.g[1] * p[1] / (self.g[1] * p[0] + 1.0));
        u[0] * r1 + u[1] * r2
    }

    /// `first` is the 0-based index of the user decoded first.
    pub fn noma_wsr(&self, u: [f64; 2], first: usize, p: [f64; 2]) -> f64 {
        let second = 1 - first;
        let (ga, gb) = (self.g[first], self.g[second]);
        let (pa, pb) = (p[first], p[second]);
        let ra = log2p(ga * pa / (ga * pb + 1.0)).min(log2p(gb * pa / (gb * pb + 1.0)));
        let rb = log2p(gb * pb);
        u[first] * ra + u[second] * rb
    }

    /// Best split of the common rate goes entirely to the larger weight.
    pub fn rsma_wsr(&self, u: [f64; 2], pc: f64, p: [f64; 2]) -> f64 {
        let rc = (0..2)
            .map(|k| log2p(self.g[k] * pc / (self.g[k] * (p[0] + p[1]) + 1.0)))
            .fold(f64::INFINITY, f64::min);
        self.sdma_wsr(u, p) + u[0].max(u[1]) * rc
    }

    /// Brute force over the stream-power simplex with `steps` points per axis.
    pub fn grid_best(&self, scheme: &str, u: [f64; 2], steps: usize) -> f64 {
        let m = steps - 1;
        let d = self.p_t / m as f64;
        let mut best: f64 = 0.0;
        let top_c = if scheme == "rsma" { m } else { 0 };
        for i in 0..=top_c {
            for j in 0..=m - i {
                for k in 0..=m - i - j {
                    let (pc, p1, p2) = (i as f64 * d, j as f64 * d, k as f64 * d);
                    let z = self.power(pc + p1 + p2);
                    let wsr = match scheme {
                        "rsma" => self.rsma_wsr(u, pc, [p1, p2]),
                        "sdma" => self.sdma_wsr(u, [p1, p2]),
                        _ => self
                            .noma_wsr(u, 0, [p1, p2])
                            .max(self.noma_wsr(u, 1, [p1, p2])),
                    };
                    best = best.max(wsr / z);
                }
            }
        }
        best
    }
}

/// Ternary search of a unimodal function on `[a, b]`.
pub fn ternary_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    f(0.5 * (a + b))
}

/// Single-user EE `log2(1 + g P) / (P / eta + p_cir)` maximized over `[0, p_t]`.
pub fn single_user_best(g: f64, eta: f64, p_cir: f64, p_t: f64) -> f64 {
    ternary_max(|p| log2p(g * p) / (p / eta + p_cir), 0.0, p_t)
}

pub const P_DYN_SET: [f64; 4] = [20.0, 27.0, 30.0, 40.0];

/// Random two-user scenario: gamma in [0.1, 1], theta in [0, pi/2], P_dyn
/// from the usual set, default power model otherwise.
pub fn random_scenario(rng: &mut ChaCha8Rng, nt: usize) -> (Scenario, f64, f64, f64) {
    let gamma = rng.gen_range(0.1..=1.0);
    let theta = rng.gen_range(0.0..=std::f64::consts::FRAC_PI_2);
    let p_dyn = P_DYN_SET[rng.gen_range(0..4)];
    let s = Scenario::two_user(
        gamma,
        theta,
        nt,
        PowerModel::from_dbm(40.0, p_dyn, 30.0, 0.35),
    )
    .expect("valid scenario");
    (s, gamma, theta, p_dyn)
}

pub fn watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
