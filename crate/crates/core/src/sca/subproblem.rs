//! Per-iteration convex subproblem and the iterate state it is built from.

use num_complex::Complex64;

use super::linearize::{linearize_qol, linearize_ratio};
use crate::conic::{AffineExpr, ConicBackend, ConicError, ConicProgram, ConicSolution, Var};
use crate::scenario::{norm_sqr, Scenario};
use crate::schemes::{CommonRateSplit, PrecoderSet, Scheme, WeightVector};

/// Which streams and common-rate shares a scheme uses once written in the
/// RSMA form. NOMA with order `pi` carries the first-decoded user's message
/// on the common stream and gives the second user no common share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLayout {
    pub common: bool,
    pub private: [bool; 2],
    pub split: [bool; 2],
}

impl StreamLayout {
    pub fn of(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Sdma => Self {
                common: false,
                private: [true, true],
                split: [false, false],
            },
            Scheme::Rsma => Self {
                common: true,
                private: [true, true],
                split: [true, true],
            },
            Scheme::Noma(order) => {
                let mut private = [true; 2];
                private[order.first()] = false;
                let mut split = [false; 2];
                split[order.first()] = true;
                Self {
                    common: true,
                    private,
                    split,
                }
            }
        }
    }

    pub fn streams(&self) -> usize {
        self.common as usize + self.private.iter().filter(|&&b| b).count()
    }
}

/// Values of all optimization variables at one SCA iterate, written in the
/// RSMA form of the scheme. Entries for streams the scheme lacks are held at
/// their neutral values (zero rate, unit `theta`, `beta = N_0`).
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    /// Square root of the weighted-sum-rate surrogate.
    pub omega: f64,
    /// Total-power surrogate (W).
    pub z: f64,
    /// Energy-efficiency epigraph variable.
    pub t: f64,
    pub alpha: [f64; 2],
    pub theta_priv: [f64; 2],
    pub beta: [f64; 2],
    pub alpha_c: [f64; 2],
    pub theta_c: [f64; 2],
    pub beta_c: [f64; 2],
    pub precoders: PrecoderSet,
    pub split: CommonRateSplit,
}

impl IterateState {
    /// Sets every auxiliary variable from the precoders by turning the
    /// surrogate inequalities into equalities. Streams outside the layout are
    /// zeroed and the split is clipped to what both users can decode.
    pub fn from_point(
        scheme: Scheme,
        s: &Scenario,
        weights: &WeightVector,
        precoders: &PrecoderSet,
        split: &CommonRateSplit,
    ) -> Self {
        let layout = StreamLayout::of(scheme);
        let nt = s.nt();
        let zero = || vec![Complex64::new(0.0, 0.0); nt];
        let mut p = PrecoderSet {
            common: Some(match (&precoders.common, layout.common) {
                (Some(c), true) => c.clone(),
                _ => zero(),
            }),
            private: precoders.private.clone(),
        };
        for k in 0..2 {
            if !layout.private[k] {
                p.private[k] = zero();
            }
        }
        let pc = p.common.as_deref().unwrap();
        let w = s.bandwidth();

        let mut beta = [0.0; 2];
        let mut beta_c = [0.0; 2];
        let mut theta_priv = [1.0; 2];
        let mut theta_c = [1.0; 2];
        let mut alpha = [0.0; 2];
        let mut alpha_c = [0.0; 2];
        for k in 0..2 {
            let j = 1 - k;
            beta[k] = s.noise(k) + s.gain(k, &p.private[j]);
            beta_c[k] = s.noise(k) + s.gain(k, &p.private[0]) + s.gain(k, &p.private[1]);
            if layout.private[k] {
                theta_priv[k] = 1.0 + s.gain(k, &p.private[k]) / beta[k];
                alpha[k] = w * theta_priv[k].log2();
            }
            if layout.common {
                theta_c[k] = 1.0 + s.gain(k, pc) / beta_c[k];
                alpha_c[k] = w * theta_c[k].log2();
            }
        }

        let common_rate = alpha_c[0].min(alpha_c[1]);
        let mut shares: [f64; 2] = std::array::from_fn(|k| {
            if layout.split[k] {
                split.get(k).max(0.0)
            } else {
                0.0
            }
        });
        let total = shares[0] + shares[1];
        if total > common_rate {
            let f = if total > 0.0 {
                common_rate / total
            } else {
                0.0
            };
            shares = [shares[0] * f, shares[1] * f];
        }
        let split = CommonRateSplit::new(shares[0], shares[1]);

        let wsr = weights.dot([shares[0] + alpha[0], shares[1] + alpha[1]]);
        let omega = wsr.max(0.0).sqrt();
        let z = s.total_power(p.transmit_power());
        Self {
            omega,
            z,
            t: omega * omega / z,
            alpha,
            theta_priv,
            beta,
            alpha_c,
            theta_c,
            beta_c,
            precoders: p,
            split,
        }
    }
}

/// Variable handles of a built subproblem. `None` marks variables the scheme
/// does not use.
#[derive(Debug, Clone)]
pub struct SubproblemVars {
    pub common: Option<Vec<Var>>,
    pub private: [Option<Vec<Var>>; 2],
    pub omega: Var,
    pub z: Var,
    pub t: Var,
    pub alpha: [Option<Var>; 2],
    pub theta_priv: [Option<Var>; 2],
    pub beta: [Option<Var>; 2],
    pub alpha_c: [Option<Var>; 2],
    pub theta_c: [Option<Var>; 2],
    pub beta_c: [Option<Var>; 2],
    pub split: [Option<Var>; 2],
}

/// A convex subproblem together with its variable map.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub scheme: Scheme,
    pub program: ConicProgram,
    pub vars: SubproblemVars,
}

/// Real and imaginary parts of `h^H p` as affine forms of the interleaved
/// real variables of `p`.
fn channel_forms(h: &[Complex64], vars: &[Var]) -> [AffineExpr; 2] {
    let mut re = AffineExpr::zero();
    let mut im = AffineExpr::zero();
    for (hi, xy) in h.iter().zip(vars.chunks(2)) {
        let (x, y) = (xy[0], xy[1]);
        re.add_term(x, hi.re);
        re.add_term(y, hi.im);
        im.add_term(y, hi.re);
        im.add_term(x, -hi.im);
    }
    [re, im]
}

fn read_complex(x: &[f64], vars: &[Var]) -> Vec<Complex64> {
    vars.chunks(2)
        .map(|v| Complex64::new(x[v[0].index()], x[v[1].index()]))
        .collect()
}

fn write_complex(x: &mut [f64], vars: &[Var], p: &[Complex64]) {
    for (v, c) in vars.chunks(2).zip(p) {
        x[v[0].index()] = c.re;
        x[v[1].index()] = c.im;
    }
}

/// Builds the convex approximation of the energy-efficiency problem around
/// `state` on a program restricted to `backend`'s capabilities.
pub fn build_subproblem_for(
    backend: &dyn ConicBackend,
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    state: &IterateState,
) -> Result<Subproblem, ConicError> {
    let layout = StreamLayout::of(scheme);
    let nt = s.nt();
    let mut prog = backend.new_program();

    let common = layout.common.then(|| prog.add_vector("pc", 2 * nt));
    let private =
        [1, 2].map(|k| layout.private[k - 1].then(|| prog.add_vector(&format!("p{k}"), 2 * nt)));
    let omega = prog.add_var("omega");
    let z = prog.add_var("z");
    let t = prog.add_var("t");
    let mut per_user = |on: [bool; 2], name: &str| {
        [1, 2].map(|k| on[k - 1].then(|| prog.add_var(format!("{name}{k}"))))
    };
    let alpha = per_user(layout.private, "alpha");
    let theta_priv = per_user(layout.private, "theta");
    let beta = per_user(layout.private, "beta");
    let alpha_c = per_user([layout.common; 2], "alpha_c");
    let theta_c = per_user([layout.common; 2], "theta_c");
    let beta_c = per_user([layout.common; 2], "beta_c");
    let split = per_user(layout.split, "c");

    let vars = SubproblemVars {
        common,
        private,
        omega,
        z,
        t,
        alpha,
        theta_priv,
        beta,
        alpha_c,
        theta_c,
        beta_c,
        split,
    };
    let v = &vars;

    prog.maximize(t);

    // energy-efficiency epigraph, linearized
    let ratio = linearize_ratio(state.omega, state.z);
    prog.add_ge("ratio", omega * ratio.omega_coeff + z * ratio.z_coeff, t)?;

    // linearized SINR constraints
    let psi = |prog: &mut ConicProgram,
               label: String,
               pvars: &[Var],
               p_bar: &[Complex64],
               beta_var: Var,
               beta_bar: f64,
               h: &[Complex64],
               theta: Var|
     -> Result<(), ConicError> {
        let f = linearize_qol(p_bar, beta_bar, h);
        let mut e = AffineExpr::term(beta_var, f.beta_coeff);
        for ((cr, ci), xy) in f.real_coeffs().zip(pvars.chunks(2)) {
            e.add_term(xy[0], cr);
            e.add_term(xy[1], ci);
        }
        prog.add_ge(label, e + 1.0, theta)?;
        Ok(())
    };
    for k in 0..2 {
        if let (Some(pv), Some(b), Some(th)) = (&v.private[k], v.beta[k], v.theta_priv[k]) {
            psi(
                &mut prog,
                format!("private sinr {}", k + 1),
                pv,
                &state.precoders.private[k],
                b,
                state.beta[k],
                s.channel(k),
                th,
            )?;
        }
        if let (Some(pv), Some(b), Some(th)) = (&v.common, v.beta_c[k], v.theta_c[k]) {
            psi(
                &mut prog,
                format!("common sinr {}", k + 1),
                pv,
                state.precoders.common.as_deref().unwrap_or(&[]),
                b,
                state.beta_c[k],
                s.channel(k),
                th,
            )?;
        }
    }

    // transmit power and its surrogate in the total consumed power
    let all_p: Vec<Var> = v
        .common
        .iter()
        .chain(v.private.iter().flatten())
        .flatten()
        .copied()
        .collect();
    prog.add_power_constraint(&all_p, s.p_t())?;
    let squares: Vec<AffineExpr> = all_p.iter().map(|&x| x.into()).collect();
    prog.add_sum_squares_le("total power", squares, (z - s.circuit_power()) * s.eta())?;

    // weighted sum rate surrogate
    let mut wsr = AffineExpr::zero();
    for k in 0..2 {
        let u = weights.get(k);
        if let Some(c) = v.split[k] {
            wsr.add_term(c, u);
            prog.add_ge(format!("c{} >= 0", k + 1), c, 0.0)?;
        }
        if let Some(a) = v.alpha[k] {
            wsr.add_term(a, u);
        }
    }
    prog.add_sum_squares_le("weighted sum rate", vec![omega.into()], wsr)?;
    prog.add_ge("omega >= 0", omega, 0.0)?;

    // rate links and interference-plus-noise definitions
    let w = s.bandwidth();
    for k in 0..2 {
        let user = k + 1;
        if let (Some(a), Some(th), Some(b)) = (v.alpha[k], v.theta_priv[k], v.beta[k]) {
            prog.add_ge(format!("alpha{user} >= 0"), a, 0.0)?;
            prog.add_ge(format!("theta{user} >= 1"), th, 1.0)?;
            prog.add_exp_rate_link(a, th, w)?;
            prog.add_ge(format!("beta{user} >= N0"), b, s.noise(k))?;
            if let Some(pj) = &v.private[1 - k] {
                prog.add_sum_squares_le(
                    format!("interference {user}"),
                    channel_forms(s.channel(k), pj).to_vec(),
                    b - s.noise(k),
                )?;
            }
        }
        if let (Some(a), Some(th), Some(b)) = (v.alpha_c[k], v.theta_c[k], v.beta_c[k]) {
            prog.add_ge(format!("alpha_c{user} >= 0"), a, 0.0)?;
            prog.add_ge(format!("theta_c{user} >= 1"), th, 1.0)?;
            prog.add_exp_rate_link(a, th, w)?;
            prog.add_ge(format!("beta_c{user} >= N0"), b, s.noise(k))?;
            let forms: Vec<AffineExpr> = v
                .private
                .iter()
                .flatten()
                .flat_map(|pj| channel_forms(s.channel(k), pj))
                .collect();
            if !forms.is_empty() {
                prog.add_sum_squares_le(
                    format!("common interference {user}"),
                    forms,
                    b - s.noise(k),
                )?;
            }
            // the common stream must be decodable by both users
            let shares = v
                .split
                .iter()
                .flatten()
                .fold(AffineExpr::zero(), |e, &c| e + c);
            prog.add_le(format!("common rate {user}"), shares, a)?;
        }
    }

    Ok(Subproblem {
        scheme,
        program: prog,
        vars,
    })
}

/// [`build_subproblem_for`] on a program accepting every constraint class.
pub fn build_subproblem(
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    state: &IterateState,
) -> Result<Subproblem, ConicError> {
    build_subproblem_for(
        &crate::conic::ClarabelBackend::default(),
        scheme,
        s,
        weights,
        state,
    )
}

impl Subproblem {
    /// Variable assignment that places `state` in this program, with `t`
    /// set to the linearized ratio at the state.
    pub fn assignment_for(&self, state: &IterateState) -> Vec<f64> {
        let v = &self.vars;
        let mut x = vec![0.0; self.program.num_vars()];
        if let (Some(vars), Some(pc)) = (&v.common, &state.precoders.common) {
            write_complex(&mut x, vars, pc);
        }
        for k in 0..2 {
            if let Some(vars) = &v.private[k] {
                write_complex(&mut x, vars, &state.precoders.private[k]);
            }
            let mut set = |var: Option<Var>, value: f64| {
                if let Some(var) = var {
                    x[var.index()] = value;
                }
            };
            set(v.alpha[k], state.alpha[k]);
            set(v.theta_priv[k], state.theta_priv[k]);
            set(v.beta[k], state.beta[k]);
            set(v.alpha_c[k], state.alpha_c[k]);
            set(v.theta_c[k], state.theta_c[k]);
            set(v.beta_c[k], state.beta_c[k]);
            set(v.split[k], state.split.get(k));
        }
        x[v.omega.index()] = state.omega;
        x[v.z.index()] = state.z;
        x[v.t.index()] = linearize_ratio(state.omega, state.z).eval(state.omega, state.z);
        x
    }

    /// Reads the precoders and the split from an optimal solution. Precoders
    /// are scaled back onto the power budget if the solver overshot it, and
    /// negative shares are clamped to zero.
    pub fn extract(
        &self,
        s: &Scenario,
        sol: &ConicSolution,
    ) -> Option<(PrecoderSet, CommonRateSplit)> {
        let x = sol.assignment.as_deref()?;
        let v = &self.vars;
        let nt = s.nt();
        let zero = || vec![Complex64::new(0.0, 0.0); nt];
        let get =
            |vars: &Option<Vec<Var>>| vars.as_deref().map_or_else(zero, |vs| read_complex(x, vs));
        let mut p = PrecoderSet {
            common: Some(get(&v.common)),
            private: [get(&v.private[0]), get(&v.private[1])],
        };
        let power = p.transmit_power();
        if power > s.p_t() {
            p = p.scaled((s.p_t() / power).sqrt());
        }
        let share = |var: Option<Var>| var.map_or(0.0, |c| x[c.index()].max(0.0));
        Some((
            p,
            CommonRateSplit::new(share(v.split[0]), share(v.split[1])),
        ))
    }
}

/// Matched-filter starting point: each present stream points along its
/// user's channel (the common stream along `h1 + h2`) with the budget split
/// equally, so the power constraint is active.
pub fn matched_filter_precoders(scheme: Scheme, s: &Scenario) -> PrecoderSet {
    let layout = StreamLayout::of(scheme);
    let nt = s.nt();
    let per_stream = s.p_t() / layout.streams() as f64;
    let h = s.channels();
    let fallback = if norm_sqr(&h[0]) > 0.0 { &h[0] } else { &h[1] };
    let direction = |v: &[Complex64]| -> Vec<Complex64> {
        let v = if norm_sqr(v) > 0.0 {
            v
        } else {
            fallback.as_slice()
        };
        let scale = (per_stream / norm_sqr(v)).sqrt();
        v.iter().map(|c| c * scale).collect()
    };
    let zero = vec![Complex64::new(0.0, 0.0); nt];
    let sum: Vec<Complex64> = h[0].iter().zip(&h[1]).map(|(a, b)| a + b).collect();
    PrecoderSet {
        common: Some(if layout.common {
            direction(&sum)
        } else {
            zero.clone()
        }),
        private: [0, 1].map(|k| {
            if layout.private[k] {
                direction(&h[k])
            } else {
                zero.clone()
            }
        }),
    }
}

/// Initial iterate: matched-filter precoders, the common rate shared equally
/// among the users entitled to a share, auxiliaries from equalities.
pub fn initialize(scheme: Scheme, s: &Scenario, weights: &WeightVector) -> IterateState {
    let p = matched_filter_precoders(scheme, s);
    initialize_from(scheme, s, weights, &p)
}

/// Same as [`initialize`] for arbitrary starting precoders.
pub fn initialize_from(
    scheme: Scheme,
    s: &Scenario,
    weights: &WeightVector,
    p: &PrecoderSet,
) -> IterateState {
    let layout = StreamLayout::of(scheme);
    let probe = IterateState::from_point(scheme, s, weights, p, &CommonRateSplit::default());
    let rc = probe.alpha_c[0].min(probe.alpha_c[1]);
    let n = layout.split.iter().filter(|&&b| b).count();
    let share = if n > 0 { rc / n as f64 } else { 0.0 };
    let split = CommonRateSplit::new(
        if layout.split[0] { share } else { 0.0 },
        if layout.split[1] { share } else { 0.0 },
    );
    IterateState::from_point(scheme, s, weights, p, &split)
}
