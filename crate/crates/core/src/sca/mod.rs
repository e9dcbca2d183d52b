//! Successive convex approximation of the energy-efficiency problem.
//!
//! Each iteration linearizes the non-convex terms around the current iterate,
//! solves the resulting convex program and moves to its solution. SDMA and
//! NOMA are handled by the same builder through their RSMA layouts.

pub mod linearize;
mod subproblem;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::conic::{ClarabelBackend, ConicBackend, ConicError, SolveStatus};
use crate::scenario::{norm_sqr, Scenario};
use crate::schemes::{
    evaluate, individual_ee, noma_as_rsma, rsma_to_noma_precoders, sdma_as_rsma, CommonRateSplit,
    DecodingOrder, PrecoderSet, RateReport, Scheme, SchemeError, SchemeKind, WeightVector,
    POWER_TOLERANCE,
};

pub use linearize::{linearize_qol, linearize_ratio, QuadOverLinBound, RatioBound};
pub use subproblem::{
    build_subproblem, build_subproblem_for, initialize, initialize_from, matched_filter_precoders,
    IterateState, StreamLayout, Subproblem, SubproblemVars,
};

/// Relative EE margin within which the two NOMA orders count as tied.
pub const NOMA_TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("both channels are zero")]
    DegenerateChannel,
    #[error("subproblem at iteration {iteration} ended with status {status}")]
    SubproblemFailure {
        iteration: usize,
        status: SolveStatus,
    },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("warm start rejected: {0}")]
    InvalidWarmStart(String),
}

/// A feasible starting point written in the RSMA form of the target scheme
/// (see [`StreamLayout`]).
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub precoders: PrecoderSet,
    pub split: CommonRateSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    /// Stop once successive objective values differ by less than this (bit/J).
    pub epsilon: f64,
    pub max_iter: usize,
    /// Random starts tried in addition to the matched-filter start.
    pub extra_starts: usize,
    /// Also start from each user served alone by matched filtering. Streams
    /// at zero stay at zero, so these runs reach the single-user optima.
    pub single_user_starts: bool,
    pub seed: u64,
    pub warm_starts: Vec<WarmStart>,
    /// RSMA only: also start from the embeddings of solved SDMA and NOMA
    /// points at the same weights.
    pub baseline_warm_starts: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iter: 100,
            extra_starts: 1,
            single_user_starts: true,
            seed: 0,
            warm_starts: Vec::new(),
            baseline_warm_starts: true,
        }
    }
}

/// One row of an SCA trace. Iteration 0 is the starting point; there `t` is
/// its energy efficiency and `status` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Optimal value of the subproblem (bit/J).
    pub t: f64,
    /// Energy efficiency of the iterate after the step.
    pub ee: f64,
    pub wsr: f64,
    pub power_w: f64,
    pub status: Option<SolveStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub scheme: SchemeKind,
    /// Precoders in the scheme's own form: no common stream for SDMA and
    /// NOMA, where the first-decoded user's message rides its private slot.
    pub precoders: PrecoderSet,
    pub split: CommonRateSplit,
    pub order: Option<DecodingOrder>,
    pub weights: WeightVector,
    pub ee: f64,
    pub wsr: f64,
    pub transmit_power: f64,
    pub report: RateReport,
    pub individual_ee: [f64; 2],
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the start that produced this result: 0 is matched filter,
    /// then the random starts, the single-user starts and the warm starts.
    pub start: usize,
}

impl SolveResult {
    pub fn scheme_tag(&self) -> Scheme {
        match (self.scheme, self.order) {
            (SchemeKind::Rsma, _) => Scheme::Rsma,
            (SchemeKind::Sdma, _) => Scheme::Sdma,
            (SchemeKind::Noma, o) => Scheme::Noma(o.unwrap_or(DecodingOrder::OneFirst)),
        }
    }

    /// Objective values `t^[n]` of the trace.
    pub fn t_values(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.t).collect()
    }

    /// The final point as an RSMA warm start with identical EE.
    pub fn as_rsma_warm_start(&self, s: &Scenario) -> WarmStart {
        let (precoders, split) = match self.scheme_tag() {
            Scheme::Rsma => (self.precoders.clone(), self.split),
            Scheme::Sdma => sdma_as_rsma(&self.precoders),
            Scheme::Noma(order) => noma_as_rsma(&self.precoders, order, s),
        };
        WarmStart { precoders, split }
    }
}

/// Writes an SCA trace as CSV with columns iteration, t, wsr, power_w, status.
pub fn write_trace_csv<W: std::io::Write>(
    out: W,
    trace: &[IterationRecord],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "t", "wsr", "power_w", "status"])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.t.to_string(),
            r.wsr.to_string(),
            r.power_w.to_string(),
            status_label(r.status),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn status_label(status: Option<SolveStatus>) -> String {
    status.map_or_else(|| "init".to_string(), |s| s.to_string())
}

/// Outcome of a single start, in normalized weights.
struct Run {
    best: IterateState,
    trace: Vec<IterationRecord>,
    iterations: usize,
    converged: bool,
}

fn check_inputs(s: &Scenario, opts: &ScaOptions) -> Result<(), ScaError> {
    if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) {
        return Err(ScaError::InvalidEpsilon(opts.epsilon));
    }
    if s.channels().iter().all(|h| norm_sqr(h) == 0.0) {
        return Err(ScaError::DegenerateChannel);
    }
    Ok(())
}

fn run_from(
    backend: &dyn ConicBackend,
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    scale: f64,
    start: IterateState,
    opts: &ScaOptions,
) -> Result<Run, ScaError> {
    let record = |iteration, t: f64, st: &IterateState, status| IterationRecord {
        iteration,
        t: t * scale,
        ee: st.t * scale,
        wsr: st.omega * st.omega * scale,
        power_w: st.precoders.transmit_power(),
        status,
    };
    let mut trace = vec![record(0, start.t, &start, None)];
    let mut prev_t = start.t;
    let mut state = start.clone();
    let mut best = start;
    let mut converged = false;
    let mut iterations = 0;
    for n in 1..=opts.max_iter {
        let sub = build_subproblem_for(backend, scheme, s, weights, &state)?;
        let sol = backend.solve(&sub.program)?;
        let Some((p, c)) = sub.extract(s, &sol) else {
            return Err(ScaError::SubproblemFailure {
                iteration: n,
                status: sol.status,
            });
        };
        iterations = n;
        state = IterateState::from_point(scheme, s, weights, &p, &c);
        let t = sol.objective_value;
        trace.push(record(n, t, &state, Some(sol.status)));
        if state.t > best.t {
            best = state.clone();
        }
        if ((t - prev_t) * scale).abs() < opts.epsilon {
            converged = true;
            break;
        }
        prev_t = t;
    }
    Ok(Run {
        best,
        trace,
        iterations,
        converged,
    })
}

/// Random start: complex Gaussian directions for the streams of the layout,
/// jointly scaled onto the power budget.
fn random_precoders(scheme: Scheme, s: &Scenario, rng: &mut ChaCha8Rng) -> PrecoderSet {
    let layout = StreamLayout::of(scheme);
    let nt = s.nt();
    let mut draw = |on: bool| -> Vec<Complex64> {
        (0..nt)
            .map(|_| {
                if on {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    };
    let p = PrecoderSet {
        common: Some(draw(layout.common)),
        private: [draw(layout.private[0]), draw(layout.private[1])],
    };
    let power = p.transmit_power();
    if power > 0.0 {
        p.scaled((s.p_t() / power).sqrt())
    } else {
        p
    }
}

/// All power on the stream carrying user `k`'s message, along `h_k`.
fn single_user_precoders(scheme: Scheme, s: &Scenario, k: usize) -> PrecoderSet {
    let nt = s.nt();
    let h = s.channel(k);
    let dir: Vec<Complex64> = if norm_sqr(h) > 0.0 {
        let scale = (s.p_t() / norm_sqr(h)).sqrt();
        h.iter().map(|c| c * scale).collect()
    } else {
        matched_filter_precoders(Scheme::Sdma, s).private[1 - k].clone()
    };
    let mut p = PrecoderSet::zeros(nt, true);
    match scheme {
        Scheme::Noma(order) if order.first() == k => p.common = Some(dir),
        _ => p.private[k] = dir,
    }
    p
}

fn scheme_code(scheme: Scheme) -> u64 {
    match scheme {
        Scheme::Rsma => 1,
        Scheme::Sdma => 2,
        // both orders draw the same numbers, so mirrored problems get
        // mirrored starts
        Scheme::Noma(_) => 3,
    }
}

fn start_rng(seed: u64, scheme: Scheme, index: usize) -> ChaCha8Rng {
    let stream = scheme_code(scheme) << 32 | index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn validate_warm_start(ws: &WarmStart, s: &Scenario) -> Result<(), ScaError> {
    let nt = s.nt();
    let dims_ok = ws.precoders.private.iter().all(|p| p.len() == nt)
        && ws.precoders.common.as_ref().is_none_or(|c| c.len() == nt);
    if !dims_ok {
        return Err(ScaError::InvalidWarmStart(
            "precoder length differs from nt".into(),
        ));
    }
    let power = ws.precoders.transmit_power();
    if !power.is_finite() || power > s.p_t() * (1.0 + POWER_TOLERANCE) {
        return Err(ScaError::InvalidWarmStart(format!(
            "transmit power {power} exceeds the budget {}",
            s.p_t()
        )));
    }
    Ok(())
}

/// Runs SCA for one fixed scheme (NOMA with a fixed order) with the default
/// backend.
pub fn sca_solve(
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
) -> Result<SolveResult, ScaError> {
    sca_solve_with(&ClarabelBackend::default(), scheme, s, weights, opts)
}

/// Runs SCA from the matched-filter start, the random starts and the warm
/// starts in `opts`, and keeps the start with the highest final EE (earliest
/// on ties). A start whose subproblem fails is dropped unless all fail.
pub fn sca_solve_with(
    backend: &dyn ConicBackend,
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
) -> Result<SolveResult, ScaError> {
    check_inputs(s, opts)?;
    for ws in &opts.warm_starts {
        validate_warm_start(ws, s)?;
    }
    // solve with weights scaled to a unit maximum; EE scales back linearly
    let scale = weights.max();
    let w_norm = weights.scaled(1.0 / scale);

    let mut starts = vec![initialize(scheme, s, &w_norm)];
    for i in 0..opts.extra_starts {
        let mut rng = start_rng(opts.seed, scheme, i);
        let p = random_precoders(scheme, s, &mut rng);
        starts.push(initialize_from(scheme, s, &w_norm, &p));
    }
    if opts.single_user_starts {
        for k in 0..2 {
            let p = single_user_precoders(scheme, s, k);
            starts.push(initialize_from(scheme, s, &w_norm, &p));
        }
    }
    for ws in &opts.warm_starts {
        starts.push(IterateState::from_point(
            scheme,
            s,
            &w_norm,
            &ws.precoders,
            &ws.split,
        ));
    }

    let mut best: Option<(usize, Run)> = None;
    let mut first_err = None;
    for (i, start) in starts.into_iter().enumerate() {
        match run_from(backend, scheme, s, &w_norm, scale, start, opts) {
            Ok(run) => {
                if best.as_ref().is_none_or(|(_, b)| run.best.t > b.best.t) {
                    best = Some((i, run));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((start, run)) = best else {
        return Err(first_err.expect("at least one start"));
    };
    finish(scheme, s, weights, start, run)
}

fn finish(
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    start: usize,
    run: Run,
) -> Result<SolveResult, ScaError> {
    let st = run.best;
    let (precoders, split) = match scheme {
        Scheme::Rsma => (st.precoders, st.split),
        Scheme::Sdma => (
            PrecoderSet::new(None, st.precoders.private),
            CommonRateSplit::default(),
        ),
        Scheme::Noma(order) => (rsma_to_noma_precoders(&st.precoders, order), st.split),
    };
    let report = evaluate(scheme, &precoders, Some(&split), weights, s)?;
    let iee = individual_ee(scheme, &precoders, Some(&split), s)?;
    Ok(SolveResult {
        scheme: scheme.kind(),
        precoders,
        split,
        order: scheme.order(),
        weights: *weights,
        ee: report.ee,
        wsr: report.wsr,
        transmit_power: report.power_w,
        report,
        individual_ee: iee,
        trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        start,
    })
}

/// Picks the better of two NOMA results; order (1,2) wins ties.
pub fn better_noma(a: SolveResult, b: SolveResult) -> SolveResult {
    let (one, two) = if a.order == Some(DecodingOrder::TwoFirst) {
        (b, a)
    } else {
        (a, b)
    };
    let margin = NOMA_TIE_TOLERANCE * one.ee.abs().max(two.ee.abs());
    if two.ee > one.ee + margin {
        two
    } else {
        one
    }
}

/// NOMA with the decoding order optimized: both orders are solved
/// independently.
pub fn solve_noma(
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
) -> Result<SolveResult, ScaError> {
    solve_noma_with(&ClarabelBackend::default(), s, weights, opts)
}

pub fn solve_noma_with(
    backend: &dyn ConicBackend,
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
) -> Result<SolveResult, ScaError> {
    let (a, b) = rayon::join(
        || {
            sca_solve_with(
                backend,
                Scheme::Noma(DecodingOrder::OneFirst),
                s,
                weights,
                opts,
            )
        },
        || {
            sca_solve_with(
                backend,
                Scheme::Noma(DecodingOrder::TwoFirst),
                s,
                weights,
                opts,
            )
        },
    );
    Ok(better_noma(a?, b?))
}

/// RSMA with warm starts taken from the given baseline results.
pub fn solve_rsma_from(
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
    baselines: &[&SolveResult],
) -> Result<SolveResult, ScaError> {
    let mut o = opts.clone();
    o.warm_starts
        .extend(baselines.iter().map(|r| r.as_rsma_warm_start(s)));
    sca_solve(Scheme::Rsma, s, weights, &o)
}

/// Solves a scheme family. For RSMA with `baseline_warm_starts`, SDMA and
/// NOMA are solved first and their points seed the RSMA run.
pub fn solve(
    kind: SchemeKind,
    s: &Scenario,
    weights: &WeightVector,
    opts: &ScaOptions,
) -> Result<SolveResult, ScaError> {
    match kind {
        SchemeKind::Sdma => sca_solve(Scheme::Sdma, s, weights, opts),
        SchemeKind::Noma => solve_noma(s, weights, opts),
        SchemeKind::Rsma if opts.baseline_warm_starts => {
            let base = ScaOptions {
                warm_starts: Vec::new(),
                ..opts.clone()
            };
            let (sdma, noma) = rayon::join(
                || sca_solve(Scheme::Sdma, s, weights, &base),
                || solve_noma(s, weights, &base),
            );
            solve_rsma_from(s, weights, opts, &[&sdma?, &noma?])
        }
        SchemeKind::Rsma => sca_solve(Scheme::Rsma, s, weights, opts),
    }
}
