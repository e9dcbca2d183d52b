//! Brute-force reference optimizers.
//!
//! [`grid_ee_nt1`] is exact up to grid resolution for one transmit antenna,
//! where every SINR depends on the stream powers only. [`grid_ee_span`]
//! searches precoders in the span of the two channels for `nt >= 2` and only
//! certifies a feasible lower bound.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{inner, norm_sqr, Scenario};
use crate::schemes::{
    evaluate, CommonRateSplit, DecodingOrder, PrecoderSet, Scheme, SchemeError, SchemeKind,
    WeightVector,
};

/// Default bound on the number of evaluated grid points.
pub const DEFAULT_CENSUS_CAP: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the power grid oracle needs nt = 1, got nt = {0}")]
    NotSingleAntenna(usize),
    #[error("the span oracle needs nt >= 2")]
    SingleAntenna,
    #[error("grid has {census} points, above the cap of {cap}")]
    GridTooLarge { census: u64, cap: u64 },
    #[error("invalid grid: {0}")]
    BadGrid(&'static str),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    /// Points per power axis, endpoints included.
    pub power_steps: usize,
    /// Points for the fraction `C_1 / R_c`, endpoints included.
    pub split_steps: usize,
    /// Points for the mixing angle between the two span directions.
    pub span_coeff_steps: usize,
    /// Points for the relative phase on `[0, 2 pi)`.
    pub phase_steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            power_steps: 101,
            split_steps: 51,
            span_coeff_steps: 5,
            phase_steps: 4,
        }
    }
}

impl GridSpec {
    /// The same number of steps on every axis.
    pub fn uniform(steps: usize) -> Self {
        Self {
            power_steps: steps,
            split_steps: steps,
            span_coeff_steps: steps,
            phase_steps: steps,
        }
    }

    /// A grid containing every point of `self`: endpoint-inclusive axes go to
    /// `2n - 1` points, the phase axis to `2n`.
    pub fn refined(&self) -> Self {
        Self {
            power_steps: 2 * self.power_steps - 1,
            split_steps: 2 * self.split_steps - 1,
            span_coeff_steps: 2 * self.span_coeff_steps - 1,
            phase_steps: 2 * self.phase_steps,
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.power_steps < 2 || self.split_steps < 2 || self.span_coeff_steps < 2 {
            return Err(OracleError::BadGrid(
                "power, split and span axes need >= 2 steps",
            ));
        }
        if self.phase_steps < 1 {
            return Err(OracleError::BadGrid("phase axis needs >= 1 step"));
        }
        Ok(())
    }
}

/// Best grid point found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePoint {
    pub scheme: Scheme,
    /// Stream powers `(P_c, P_1, P_2)` in watts (NOMA: `P_c = 0`).
    pub powers: [f64; 3],
    /// Grid fraction `C_1 / R_c` (RSMA only).
    pub split_fraction: Option<f64>,
    pub precoders: PrecoderSet,
    pub split: CommonRateSplit,
    pub ee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub best_ee: f64,
    pub best_point: OraclePoint,
    /// Number of evaluated grid points.
    pub census: u64,
    pub wall_time_s: f64,
}

/// Number of integer triples (or pairs) with sum at most `n - 1`.
fn simplex_size(steps: usize, dims: u32) -> u64 {
    let m = steps as u64 - 1;
    match dims {
        1 => m + 1,
        2 => (m + 1) * (m + 2) / 2,
        _ => (m + 1) * (m + 2) * (m + 3) / 6,
    }
}

fn streams(kind: SchemeKind) -> u32 {
    match kind {
        SchemeKind::Rsma => 3,
        _ => 2,
    }
}

/// Grid size of [`grid_ee_nt1`] for a scheme family.
pub fn census_nt1(kind: SchemeKind, grid: &GridSpec) -> u64 {
    let powers = simplex_size(grid.power_steps, streams(kind));
    match kind {
        SchemeKind::Rsma => powers * grid.split_steps as u64,
        SchemeKind::Sdma => powers,
        SchemeKind::Noma => 2 * powers,
    }
}

/// Grid size of [`grid_ee_span`] for a scheme family.
pub fn census_span(kind: SchemeKind, grid: &GridSpec) -> u64 {
    let dirs = (grid.span_coeff_steps * grid.phase_steps) as u64;
    census_nt1(kind, grid).saturating_mul(dirs.saturating_pow(streams(kind)))
}

fn orders(kind: SchemeKind) -> Vec<Scheme> {
    match kind {
        SchemeKind::Rsma => vec![Scheme::Rsma],
        SchemeKind::Sdma => vec![Scheme::Sdma],
        SchemeKind::Noma => DecodingOrder::BOTH
            .iter()
            .map(|&o| Scheme::Noma(o))
            .collect(),
    }
}

/// Candidate with its lexicographic grid index; larger EE wins, then the
/// smaller index.
#[derive(Debug, Clone)]
struct Candidate {
    ee: f64,
    index: Vec<usize>,
    point: OraclePoint,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    if b.ee > a.ee || (b.ee == a.ee && b.index < a.index) {
        b
    } else {
        a
    }
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(better(a, b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Stream directions for one antenna: the precoder is `sqrt(P)`.
fn scalar(power: f64) -> Vec<Complex64> {
    vec![Complex64::new(power.sqrt(), 0.0)]
}

/// Evaluates every split fraction for one set of precoders; returns the best.
fn eval_point(
    scheme: Scheme,
    p: &PrecoderSet,
    powers: [f64; 3],
    weights: &WeightVector,
    s: &Scenario,
    split_steps: usize,
    index: Vec<usize>,
) -> Result<Option<Candidate>, OracleError> {
    let mut best: Option<Candidate> = None;
    let mut consider = |ee: f64, split: CommonRateSplit, frac: Option<f64>, sub: usize| {
        let mut idx = index.clone();
        idx.push(sub);
        let c = Candidate {
            ee,
            index: idx,
            point: OraclePoint {
                scheme,
                powers,
                split_fraction: frac,
                precoders: p.clone(),
                split,
                ee,
            },
        };
        best = pick(best.take(), Some(c));
    };
    match scheme {
        Scheme::Rsma => {
            let rc = evaluate(scheme, p, None, weights, s)?
                .common_rate
                .unwrap_or(0.0);
            for i in 0..split_steps {
                let f = i as f64 / (split_steps - 1) as f64;
                let split = CommonRateSplit::new(f * rc, (rc - f * rc).max(0.0));
                let ee = evaluate(scheme, p, Some(&split), weights, s)?.ee;
                consider(ee, split, Some(f), i);
            }
        }
        _ => {
            let ee = evaluate(scheme, p, None, weights, s)?.ee;
            consider(ee, CommonRateSplit::default(), None, 0);
        }
    }
    Ok(best)
}

/// Enumerates `(i, j, k)` with `i + j + k <= m` (`i = 0` when `with_common`
/// is false) as stream powers on `[0, P_t]`.
fn power_triples(m: usize, with_common: bool) -> Vec<[usize; 3]> {
    let top = if with_common { m } else { 0 };
    let mut out = Vec::new();
    for i in 0..=top {
        for j in 0..=m - i {
            for k in 0..=m - i - j {
                out.push([i, j, k]);
            }
        }
    }
    out
}

fn finish(best: Option<Candidate>, census: u64, start: Instant) -> OracleResult {
    let best = best.expect("grid is nonempty");
    OracleResult {
        best_ee: best.ee,
        best_point: best.point,
        census,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Exhaustive search over stream powers and common-rate splits for `nt = 1`.
/// NOMA enumerates both decoding orders.
pub fn grid_ee_nt1(
    kind: SchemeKind,
    s: &Scenario,
    weights: &WeightVector,
    grid: &GridSpec,
) -> Result<OracleResult, OracleError> {
    if s.nt() != 1 {
        return Err(OracleError::NotSingleAntenna(s.nt()));
    }
    grid.validate()?;
    let start = Instant::now();
    let m = grid.power_steps - 1;
    let step = s.p_t() / m as f64;
    let mut best = None;
    for (o, scheme) in orders(kind).into_iter().enumerate() {
        let with_common = scheme == Scheme::Rsma;
        let found = power_triples(m, with_common)
            .into_par_iter()
            .map(|[i, j, k]| {
                let powers = [i as f64 * step, j as f64 * step, k as f64 * step];
                let p = PrecoderSet::new(
                    with_common.then(|| scalar(powers[0])),
                    [scalar(powers[1]), scalar(powers[2])],
                );
                eval_point(
                    scheme,
                    &p,
                    powers,
                    weights,
                    s,
                    grid.split_steps,
                    vec![o, i, j, k],
                )
            })
            .try_reduce_with(|a, b| Ok(pick(a, b)))
            .transpose()?
            .flatten();
        best = pick(best, found);
    }
    Ok(finish(best, census_nt1(kind, grid), start))
}

/// Orthonormal basis of `span{h_1, h_2}` (one vector when they are parallel).
pub fn channel_span_basis(s: &Scenario) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for h in s.channels() {
        let mut v = h.clone();
        for b in &basis {
            let c = inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > 1e-9 * norm_sqr(h).sqrt().max(1e-300) {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Unit-norm directions `cos(phi) e_1 + sin(phi) e^{j psi} e_2` over the grid.
fn span_directions(basis: &[Vec<Complex64>], grid: &GridSpec) -> Vec<Vec<Complex64>> {
    let nt = basis[0].len();
    let mut out = Vec::new();
    for a in 0..grid.span_coeff_steps {
        let phi = std::f64::consts::FRAC_PI_2 * a as f64 / (grid.span_coeff_steps - 1) as f64;
        for b in 0..grid.phase_steps {
            let psi = std::f64::consts::TAU * b as f64 / grid.phase_steps as f64;
            let c2 = Complex64::from_polar(phi.sin(), psi);
            let v = (0..nt)
                .map(|i| {
                    let second = basis.get(1).map_or(Complex64::new(0.0, 0.0), |e| e[i] * c2);
                    basis[0][i] * phi.cos() + second
                })
                .collect();
            out.push(v);
        }
    }
    out
}

/// Search over precoders in the channel span: a power simplex grid, a
/// direction grid per stream and (RSMA) the split grid. The result is a
/// feasible point, hence a lower bound on the optimum.
pub fn grid_ee_span(
    kind: SchemeKind,
    s: &Scenario,
    weights: &WeightVector,
    grid: &GridSpec,
) -> Result<OracleResult, OracleError> {
    grid_ee_span_capped(kind, s, weights, grid, DEFAULT_CENSUS_CAP)
}

pub fn grid_ee_span_capped(
    kind: SchemeKind,
    s: &Scenario,
    weights: &WeightVector,
    grid: &GridSpec,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    if s.nt() < 2 {
        return Err(OracleError::SingleAntenna);
    }
    grid.validate()?;
    let census = census_span(kind, grid);
    if census > cap {
        return Err(OracleError::GridTooLarge { census, cap });
    }
    let start = Instant::now();
    let basis = channel_span_basis(s);
    let dirs = span_directions(&basis, grid);
    let nd = dirs.len();
    let m = grid.power_steps - 1;
    let step = s.p_t() / m as f64;
    let scaled = |d: &[Complex64], power: f64| -> Vec<Complex64> {
        d.iter().map(|x| x * power.sqrt()).collect()
    };

    let mut best = None;
    for (o, scheme) in orders(kind).into_iter().enumerate() {
        let with_common = scheme == Scheme::Rsma;
        let nc = if with_common { nd } else { 1 };
        let jobs: Vec<([usize; 3], usize)> = power_triples(m, with_common)
            .into_iter()
            .flat_map(|t| (0..nc).map(move |dc| (t, dc)))
            .collect();
        let found = jobs
            .into_par_iter()
            .map(
                |([i, j, k], dc)| -> Result<Option<Candidate>, OracleError> {
                    let powers = [i as f64 * step, j as f64 * step, k as f64 * step];
                    let mut local = None;
                    for d1 in 0..nd {
                        for d2 in 0..nd {
                            let p = PrecoderSet::new(
                                with_common.then(|| scaled(&dirs[dc], powers[0])),
                                [scaled(&dirs[d1], powers[1]), scaled(&dirs[d2], powers[2])],
                            );
                            let idx = vec![o, i, j, k, dc, d1, d2];
                            let c =
                                eval_point(scheme, &p, powers, weights, s, grid.split_steps, idx)?;
                            local = pick(local, c);
                        }
                    }
                    Ok(local)
                },
            )
            .try_reduce_with(|a, b| Ok(pick(a, b)))
            .transpose()?
            .flatten();
        best = pick(best, found);
    }
    Ok(finish(best, census, start))
}

/// Maximizes the single-user efficiency
/// `W log2(1 + gain P / N_0) / (P / eta + P_cir)` over `P in [0, p_max]` by
/// golden-section search; the function is unimodal in `P`.
/// Returns `(P*, EE*)`.
pub fn single_user_ee_max(
    gain: f64,
    noise: f64,
    bandwidth: f64,
    eta: f64,
    p_cir: f64,
    p_max: f64,
) -> (f64, f64) {
    let f = |p: f64| bandwidth * (1.0 + gain * p / noise).log2() / (p / eta + p_cir);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, p_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 * p_max.max(1.0) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let p = 0.5 * (a + b);
    (p, f(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::PowerModel;

    fn nt1(g2: f64) -> Scenario {
        Scenario::two_user(g2, 0.0, 1, PowerModel::from_dbm(40.0, 30.0, 30.0, 0.35)).unwrap()
    }

    #[test]
    fn census_counts() {
        let g = GridSpec::default();
        assert_eq!(census_nt1(SchemeKind::Sdma, &g), 5151);
        assert_eq!(census_nt1(SchemeKind::Noma, &g), 10302);
        assert_eq!(census_nt1(SchemeKind::Rsma, &g), 176851 * 51);
        let coarse = GridSpec::uniform(5);
        assert!(census_span(SchemeKind::Rsma, &coarse) <= DEFAULT_CENSUS_CAP);
    }

    #[test]
    fn wrong_antenna_counts_rejected() {
        let w = WeightVector::equal();
        let s4 = Scenario::two_user(1.0, 0.5, 4, PowerModel::default()).unwrap();
        assert_eq!(
            grid_ee_nt1(SchemeKind::Sdma, &s4, &w, &GridSpec::default()).unwrap_err(),
            OracleError::NotSingleAntenna(4)
        );
        assert_eq!(
            grid_ee_span(SchemeKind::Sdma, &nt1(0.5), &w, &GridSpec::uniform(3)).unwrap_err(),
            OracleError::SingleAntenna
        );
        let err = grid_ee_span_capped(SchemeKind::Rsma, &s4, &w, &GridSpec::uniform(5), 1000);
        assert!(matches!(err, Err(OracleError::GridTooLarge { .. })));
    }

    #[test]
    fn best_point_is_feasible_and_positive() {
        let s = nt1(0.3);
        let w = WeightVector::equal();
        let g = GridSpec {
            power_steps: 21,
            split_steps: 11,
            ..GridSpec::default()
        };
        for kind in SchemeKind::ALL {
            let r = grid_ee_nt1(kind, &s, &w, &g).unwrap();
            assert!(r.best_ee > 0.0);
            assert!(r.best_point.powers.iter().sum::<f64>() <= s.p_t() * (1.0 + 1e-12));
            let again = evaluate(
                r.best_point.scheme,
                &r.best_point.precoders,
                Some(&r.best_point.split),
                &w,
                &s,
            )
            .unwrap();
            assert_eq!(again.ee, r.best_ee);
        }
    }

    #[test]
    fn golden_section_matches_dense_scan() {
        let (p, ee) = single_user_ee_max(1.0, 1.0, 1.0, 0.35, 2.0, 10.0);
        let f = |p: f64| (1.0 + p).log2() / (p / 0.35 + 2.0);
        let scan = (0..=100_000)
            .map(|i| f(i as f64 * 1e-4))
            .fold(0.0, f64::max);
        assert!((ee - scan).abs() < 1e-9);
        assert!(p > 0.0 && p < 10.0);
    }

    #[test]
    fn span_basis_is_orthonormal() {
        let s = Scenario::two_user(0.7, 1.1, 4, PowerModel::default()).unwrap();
        let b = channel_span_basis(&s);
        assert_eq!(b.len(), 2);
        assert!((norm_sqr(&b[0]) - 1.0).abs() < 1e-12);
        assert!(inner(&b[0], &b[1]).norm() < 1e-12);
        let aligned = Scenario::two_user(0.7, 0.0, 4, PowerModel::default()).unwrap();
        assert_eq!(channel_span_basis(&aligned).len(), 1);
    }
}
