//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rsma_ee::oracle::{grid_ee_nt1, GridSpec};
use rsma_ee::region::{default_thetas, sweep_schemes, WeightSweep};
use rsma_ee::sca::*;
use rsma_ee::scenario::{PowerModel, Scenario};
use rsma_ee::schemes::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Collects forward-model mismatches of every result seen by the run.
#[derive(Default)]
struct Forward {
    checked: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Forward {
    fn check(&mut self, r: &SolveResult, s: &Scenario) {
        self.checked += 1;
        let fwd = evaluate_ee(r.scheme_tag(), &r.precoders, Some(&r.split), &r.weights, s);
        let rel = match fwd {
            Ok(f) => (f - r.ee).abs() / f.abs().max(1e-300),
            Err(_) => f64::INFINITY,
        };
        self.worst = self.worst.max(rel);
        if rel.is_nan() || rel > 1e-6 {
            self.failures
                .push(format!("{:?} ee {} rel {rel:e}", r.scheme_tag(), r.ee));
        }
    }
}

fn trace_drop(r: &SolveResult) -> f64 {
    r.trace
        .windows(2)
        .map(|w| w[0].t - w[1].t)
        .fold(0.0, f64::max)
}

fn monotone_traces(fwd: &mut Forward) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = ScaOptions::default();
    let (mut traces, mut worst) = (0usize, 0.0f64);
    let mut bad = Vec::new();
    for i in 0..100 {
        let nt = [1, 2, 4][rng.gen_range(0..3)];
        let (s, gamma, theta, p_dyn) = common::random_scenario(&mut rng, nt);
        let w = WeightVector::new(1.0, 10f64.powf(rng.gen_range(-3.0..=3.0))).unwrap();
        let sdma = sca_solve(Scheme::Sdma, &s, &w, &opts);
        let n1 = sca_solve(Scheme::Noma(DecodingOrder::OneFirst), &s, &w, &opts);
        let n2 = sca_solve(Scheme::Noma(DecodingOrder::TwoFirst), &s, &w, &opts);
        let (Ok(sdma), Ok(n1), Ok(n2)) = (sdma, n1, n2) else {
            bad.push(format!("scenario {i}: baseline solve failed"));
            continue;
        };
        let noma = better_noma(n1.clone(), n2.clone());
        let rsma = match solve_rsma_from(&s, &w, &opts, &[&sdma, &noma]) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("scenario {i}: rsma failed: {e}"));
                continue;
            }
        };
        for r in [&sdma, &n1, &n2, &rsma] {
            traces += 1;
            fwd.check(r, &s);
            let d = trace_drop(r);
            worst = worst.max(d);
            if d > 1e-6 {
                bad.push(format!(
                    "scenario {i} (nt {nt}, gamma {gamma:.3}, theta {theta:.3}, P_dyn {p_dyn}) {:?}: drop {d:e}",
                    r.scheme_tag()
                ));
            }
        }
    }
    outcome(
        bad.is_empty() && traces >= 400,
        format!(
            "{traces} traces over 100 scenarios, largest decrease {worst:.2e}; {}",
            bad.join("; ")
        ),
    )
}

fn reference_convergence(fwd: &mut Forward) -> Outcome {
    let opts = ScaOptions::default();
    let w = WeightVector::equal();
    let mut worst = 0usize;
    let mut bad = Vec::new();
    for p_dyn in [20.0, 30.0, 40.0] {
        let s = Scenario::two_user(
            1.0,
            2.0 * PI / 9.0,
            4,
            PowerModel::from_dbm(40.0, p_dyn, 30.0, 0.35),
        )
        .unwrap();
        for kind in SchemeKind::ALL {
            match solve(kind, &s, &w, &opts) {
                Ok(r) => {
                    fwd.check(&r, &s);
                    worst = worst.max(r.iterations);
                    if !r.converged || r.iterations > 50 || trace_drop(&r) > 1e-6 {
                        bad.push(format!("{kind} P_dyn {p_dyn}: {} iterations", r.iterations));
                    }
                }
                Err(e) => bad.push(format!("{kind} P_dyn {p_dyn}: {e}")),
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("9 runs, at most {worst} iterations; {}", bad.join("; ")),
    )
}

fn oracle_single_antenna(fwd: &mut Forward) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = ScaOptions::default();
    let grid = GridSpec::default();
    let mut worst = (0.0f64, String::new());
    let mut bad = Vec::new();
    for i in 0..50 {
        let (s, gamma, _, p_dyn) = common::random_scenario(&mut rng, 1);
        let w = WeightVector::new(1.0, 10f64.powf(rng.gen_range(-1.0..=1.0))).unwrap();
        for kind in SchemeKind::ALL {
            let (sca, oracle) = match (solve(kind, &s, &w, &opts), grid_ee_nt1(kind, &s, &w, &grid))
            {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    bad.push(format!("scenario {i} {kind}: solve failed"));
                    continue;
                }
            };
            fwd.check(&sca, &s);
            let gap = (sca.ee - oracle.best_ee).abs() / oracle.best_ee;
            let label = format!(
                "scenario {i} {kind} (gamma {gamma:.3}, P_dyn {p_dyn}, u2 {:.3})",
                w.get(1)
            );
            if gap > worst.0 {
                worst = (gap, label.clone());
            }
            if gap > 0.02 {
                bad.push(format!("{label}: gap {gap:.4}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "150 comparisons, worst gap {:.3}% at {}; {}",
            100.0 * worst.0,
            worst.1,
            bad.join("; ")
        ),
    )
}

fn dominance_matrix() -> Outcome {
    let opts = ScaOptions::default();
    let sweep = WeightSweep::default();
    let (mut points, mut worst) = (0usize, f64::NEG_INFINITY);
    let mut bad = Vec::new();
    for gamma in [1.0, 0.3] {
        for theta in default_thetas() {
            for p_dyn in [27.0, 40.0] {
                let s = Scenario::two_user(
                    gamma,
                    theta,
                    4,
                    PowerModel::from_dbm(40.0, p_dyn, 30.0, 0.35),
                )
                .unwrap();
                let b = sweep_schemes(&SchemeKind::ALL, &s, &sweep, &opts);
                let (rs, sd, no) = (&b[0], &b[1], &b[2]);
                for k in 0..sweep.len() {
                    points += 1;
                    let (r, x, y) = (rs.points[k], sd.points[k], no.points[k]);
                    let best = x.ee.max(y.ee);
                    let shortfall = best - r.ee;
                    worst = worst.max(shortfall);
                    if !(r.valid && x.valid && y.valid) || shortfall > 1e-6 {
                        bad.push(format!(
                            "gamma {gamma} theta {theta:.3} P_dyn {p_dyn} u2 {:.3e}: rsma {} vs {best}",
                            r.u2, r.ee
                        ));
                    }
                }
            }
        }
    }
    outcome(
        bad.is_empty() && points == 2 * 4 * 2 * 43,
        format!(
            "{points} weight points, largest shortfall {worst:.2e}; {}",
            bad.join("; ")
        ),
    )
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect()
}

fn quad_over_lin(p: &[Complex64], beta: f64, h: &[Complex64]) -> f64 {
    let a: Complex64 = h.iter().zip(p).map(|(x, y)| x.conj() * y).sum();
    a.norm_sqr() / beta
}

fn linearization_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_tight, mut violations) = (0.0f64, 0usize);
    for _ in 0..10_000 {
        // ratio w^2 / z
        let (wb, zb) = (rng.gen_range(0.0..20.0), rng.gen_range(0.01..50.0));
        let (w, z) = (rng.gen_range(0.0..20.0), rng.gen_range(0.01..50.0));
        let b = linearize_ratio(wb, zb);
        let exact = wb * wb / zb;
        worst_tight = worst_tight.max((b.eval(wb, zb) - exact).abs() / exact.max(1e-300));
        let f = w * w / z;
        if b.eval(w, z) > f + 1e-12 * f.max(1.0) {
            violations += 1;
        }
        // |h^H p|^2 / beta
        let nt = rng.gen_range(1..=4);
        let h = random_vec(&mut rng, nt);
        let (pb, p) = (random_vec(&mut rng, nt), random_vec(&mut rng, nt));
        let (betab, beta) = (rng.gen_range(1.0..30.0), rng.gen_range(1.0..30.0));
        let q = linearize_qol(&pb, betab, &h);
        let exact = quad_over_lin(&pb, betab, &h);
        worst_tight = worst_tight.max((q.eval(&pb, betab) - exact).abs() / exact.max(1e-300));
        let f = quad_over_lin(&p, beta, &h);
        if q.eval(&p, beta) > f + 1e-12 * f.max(1.0) {
            violations += 1;
        }
    }
    outcome(
        worst_tight <= 1e-12 && violations == 0,
        format!("tightness {worst_tight:.2e}, {violations} violations in 2 x 10^4 samples"),
    )
}

fn embeddings() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let nt = [1, 2, 4][rng.gen_range(0..3)];
        let (s, ..) = common::random_scenario(&mut rng, nt);
        let w = WeightVector::new(1.0, 10f64.powf(rng.gen_range(-3.0..=3.0))).unwrap();
        let p = PrecoderSet::new(None, [random_vec(&mut rng, nt), random_vec(&mut rng, nt)]);
        let p = p.scaled((rng.gen_range(0.0..=1.0) * s.p_t() / p.transmit_power()).sqrt());
        let (scheme, (rp, split)) = if i % 2 == 0 {
            (Scheme::Sdma, sdma_as_rsma(&p))
        } else {
            let order = DecodingOrder::BOTH[rng.gen_range(0..2)];
            (Scheme::Noma(order), noma_as_rsma(&p, order, &s))
        };
        let a = evaluate_ee(scheme, &p, None, &w, &s).unwrap();
        let b = evaluate_ee(Scheme::Rsma, &rp, Some(&split), &w, &s).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(1e-300));
    }
    outcome(
        worst <= 1e-9,
        format!("200 points, worst relative difference {worst:.2e}"),
    )
}

fn forward_consistency(fwd: &Forward) -> Outcome {
    outcome(
        fwd.failures.is_empty() && fwd.checked > 0,
        format!(
            "{} results, worst relative mismatch {:.2e}; {}",
            fwd.checked,
            fwd.worst,
            fwd.failures.join("; ")
        ),
    )
}

fn region_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        let args = [
            "rsma-ee",
            "region",
            "--seed",
            "7",
            "--gamma",
            "0.3",
            "--pdyn-dbm",
            "40",
            "--out",
            path.to_str().unwrap(),
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = rsma_ee::cli::run(args, &mut out, &mut err);
        if code != 0 {
            return Err(format!("exit {code}: {}", String::from_utf8_lossy(&err)));
        }
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    match (run("a.csv"), run("b.csv")) {
        (Ok(a), Ok(b)) => outcome(
            a == b && !a.is_empty(),
            format!(
                "{} bytes, {} rows, identical: {}",
                a.len(),
                a.iter().filter(|&&c| c == b'\n').count() - 1,
                a == b
            ),
        ),
        (a, b) => outcome(false, format!("{:?} / {:?}", a.err(), b.err())),
    }
}

fn main() {
    let mut fwd = Forward::default();
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            o.detail.trim_end_matches("; ")
        );
        if !o.pass {
            failed += 1;
        }
    };
    report("monotone-traces", &mut || monotone_traces(&mut fwd));
    report("convergence-speed", &mut || reference_convergence(&mut fwd));
    report("oracle-equivalence-nt1", &mut || {
        oracle_single_antenna(&mut fwd)
    });
    report("scheme-dominance", &mut dominance_matrix);
    report("linearization", &mut linearization_suite);
    report("embedding", &mut embeddings);
    report("forward-consistency", &mut || forward_consistency(&fwd));
    report("region-determinism", &mut region_determinism);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
