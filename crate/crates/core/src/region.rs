//! Energy-efficiency regions traced by sweeping the weight of user 2.

use rayon::prelude::*;
use serde::Serialize;

use crate::sca::{sca_solve, solve_noma, solve_rsma_from, ScaError, ScaOptions, SolveResult};
use crate::scenario::Scenario;
use crate::schemes::{Scheme, SchemeKind, WeightVector};

/// Exponents `e` of `u_2 = 10^e`, with `u_1 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSweep {
    exponents: Vec<f64>,
}

impl Default for WeightSweep {
    /// `-3`, then `-1` to `1` in steps of `0.05`, then `3`: 43 points.
    fn default() -> Self {
        let mut exponents = vec![-3.0];
        exponents.extend((0..=40).map(|i| (i as f64 - 20.0) / 20.0));
        exponents.push(3.0);
        Self { exponents }
    }
}

impl WeightSweep {
    /// `None` when empty or when an exponent is not finite.
    pub fn new(exponents: Vec<f64>) -> Option<Self> {
        (!exponents.is_empty() && exponents.iter().all(|e| e.is_finite()))
            .then_some(Self { exponents })
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = WeightVector> + '_ {
        self.exponents
            .iter()
            .map(|e| WeightVector::new(1.0, 10f64.powf(*e)).expect("finite exponent"))
    }
}

/// Channel-angle grid used for the region panels, from nearly aligned to
/// nearly orthogonal channels.
pub fn default_thetas() -> [f64; 4] {
    use std::f64::consts::PI;
    [PI / 9.0, 2.0 * PI / 9.0, PI / 3.0, 4.0 * PI / 9.0]
}

/// One weight point of a region boundary. A failed solve leaves `valid`
/// false and the EE fields NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub u2: f64,
    pub ee1: f64,
    pub ee2: f64,
    /// Weighted energy efficiency `ee1 + u2 ee2`.
    pub ee: f64,
    pub wsr: f64,
    pub power_w: f64,
    pub iterations: usize,
    pub converged: bool,
    pub valid: bool,
}

impl RegionPoint {
    fn from_result(u2: f64, r: &Result<SolveResult, ScaError>) -> Self {
        match r {
            Ok(r) => Self {
                u2,
                ee1: r.individual_ee[0],
                ee2: r.individual_ee[1],
                ee: r.ee,
                wsr: r.wsr,
                power_w: r.transmit_power,
                iterations: r.iterations,
                converged: r.converged,
                valid: true,
            },
            Err(_) => Self {
                u2,
                ee1: f64::NAN,
                ee2: f64::NAN,
                ee: f64::NAN,
                wsr: f64::NAN,
                power_w: f64::NAN,
                iterations: 0,
                converged: false,
                valid: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionBoundary {
    pub scheme: SchemeKind,
    pub points: Vec<RegionPoint>,
}

impl RegionBoundary {
    pub fn valid_points(&self) -> impl Iterator<Item = &RegionPoint> {
        self.points.iter().filter(|p| p.valid)
    }
}

/// Solves one scheme family at every weight of the sweep.
pub fn sweep(
    kind: SchemeKind,
    s: &Scenario,
    weights: &WeightSweep,
    opts: &ScaOptions,
) -> RegionBoundary {
    sweep_schemes(&[kind], s, weights, opts).remove(0)
}

/// Solves each requested scheme family at every weight. RSMA is always
/// warm-started from the SDMA and NOMA solutions at the same weight, which
/// are computed even when not requested. Output order follows `kinds`.
pub fn sweep_schemes(
    kinds: &[SchemeKind],
    s: &Scenario,
    weights: &WeightSweep,
    opts: &ScaOptions,
) -> Vec<RegionBoundary> {
    let base = ScaOptions {
        warm_starts: Vec::new(),
        ..opts.clone()
    };
    let want = |k| kinds.contains(&k);
    let need_base = want(SchemeKind::Rsma);
    let ws: Vec<WeightVector> = weights.weights().collect();
    let per_weight: Vec<Vec<(SchemeKind, RegionPoint)>> = ws
        .par_iter()
        .map(|w| {
            let sdma =
                (want(SchemeKind::Sdma) || need_base).then(|| sca_solve(Scheme::Sdma, s, w, &base));
            let noma = (want(SchemeKind::Noma) || need_base).then(|| solve_noma(s, w, &base));
            let rsma = need_base.then(|| {
                let baselines: Vec<&SolveResult> = [&sdma, &noma]
                    .into_iter()
                    .filter_map(|r| r.as_ref().and_then(|r| r.as_ref().ok()))
                    .collect();
                solve_rsma_from(s, w, opts, &baselines)
            });
            kinds
                .iter()
                .map(|&k| {
                    let r = match k {
                        SchemeKind::Sdma => sdma.as_ref(),
                        SchemeKind::Noma => noma.as_ref(),
                        SchemeKind::Rsma => rsma.as_ref(),
                    }
                    .expect("solved above");
                    (k, RegionPoint::from_result(w.u2, r))
                })
                .collect()
        })
        .collect();
    kinds
        .iter()
        .enumerate()
        .map(|(i, &scheme)| RegionBoundary {
            scheme,
            points: per_weight.iter().map(|row| row[i].1).collect(),
        })
        .collect()
}

/// A point of `b` not covered by `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceViolation {
    pub u2: f64,
    pub ee1: f64,
    pub ee2: f64,
    /// Smallest over `a`'s points of the larger coordinate shortfall.
    pub shortfall: f64,
}

/// Checks that every valid point of `b` is weakly dominated, coordinate-wise
/// within `tol`, by some valid point of `a`.
pub fn region_dominates(
    a: &RegionBoundary,
    b: &RegionBoundary,
    tol: f64,
) -> (bool, Vec<DominanceViolation>) {
    let violations: Vec<DominanceViolation> = b
        .valid_points()
        .filter_map(|q| {
            let shortfall = a
                .valid_points()
                .map(|p| (q.ee1 - p.ee1).max(q.ee2 - p.ee2).max(0.0))
                .fold(f64::INFINITY, f64::min);
            (shortfall > tol).then_some(DominanceViolation {
                u2: q.u2,
                ee1: q.ee1,
                ee2: q.ee2,
                shortfall,
            })
        })
        .collect();
    (violations.is_empty(), violations)
}

/// Weight points where `a`'s weighted EE falls below `b`'s by more than `tol`.
/// Both boundaries must come from the same sweep.
pub fn weighted_shortfalls(a: &RegionBoundary, b: &RegionBoundary, tol: f64) -> Vec<(f64, f64)> {
    a.points
        .iter()
        .zip(&b.points)
        .filter(|(p, q)| p.valid && q.valid && p.ee < q.ee - tol)
        .map(|(p, q)| (p.u2, q.ee - p.ee))
        .collect()
}

/// Upper-right convex hull of the points together with the axis
/// projections, ordered by increasing `ee1`. For plotting only.
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return pts;
    }
    let max_x = pts.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    let max_y = pts.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    pts.push((0.0, max_y));
    pts.push((max_x, 0.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup();
    // monotone chain, upper part
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// One row of the region CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RegionRow {
    pub scheme: SchemeKind,
    pub gamma: f64,
    pub theta: f64,
    pub p_dyn_dbm: f64,
    pub u2: f64,
    pub ee1: f64,
    pub ee2: f64,
    pub wsr: f64,
    pub power_w: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl RegionRow {
    pub fn rows(
        b: &RegionBoundary,
        gamma: f64,
        theta: f64,
        p_dyn_dbm: f64,
    ) -> impl Iterator<Item = RegionRow> + '_ {
        b.points.iter().map(move |p| RegionRow {
            scheme: b.scheme,
            gamma,
            theta,
            p_dyn_dbm,
            u2: p.u2,
            ee1: p.ee1,
            ee2: p.ee2,
            wsr: p.wsr,
            power_w: p.power_w,
            iterations: p.iterations,
            converged: p.converged,
        })
    }
}

/// Writes region rows as CSV with a header line.
pub fn write_region_csv<W: std::io::Write>(
    out: W,
    rows: impl IntoIterator<Item = RegionRow>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
