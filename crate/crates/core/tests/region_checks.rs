mod common;

use std::f64::consts::PI;

use rsma_ee::region::*;
use rsma_ee::sca::{solve, ScaOptions};
use rsma_ee::scenario::{PowerModel, Scenario};
use rsma_ee::schemes::*;

fn scenario(gamma: f64, theta: f64, p_dyn: f64) -> Scenario {
    Scenario::two_user(
        gamma,
        theta,
        4,
        PowerModel::from_dbm(40.0, p_dyn, 30.0, 0.35),
    )
    .unwrap()
}

#[test]
fn default_sweep_has_43_points() {
    let ws = WeightSweep::default();
    assert_eq!(ws.len(), 43);
    let e = ws.exponents();
    assert_eq!((e[0], e[1], e[41], e[42]), (-3.0, -1.0, 1.0, 3.0));
    assert!(e.windows(2).all(|w| w[1] > w[0]));
    let s = scenario(1.0, PI / 3.0, 40.0);
    let b = sweep(SchemeKind::Sdma, &s, &ws, &ScaOptions::default());
    assert_eq!(b.points.len(), 43);
    assert!(b.points.iter().all(|p| p.valid));
}

#[test]
fn tiny_second_weight_favours_the_stronger_user() {
    let ws = WeightSweep::new(vec![-3.0]).unwrap();
    for (gamma, theta) in [
        (1.0, PI / 9.0),
        (0.3, 2.0 * PI / 9.0),
        (0.6, 4.0 * PI / 9.0),
    ] {
        let s = scenario(gamma, theta, 27.0);
        for b in sweep_schemes(&SchemeKind::ALL, &s, &ws, &ScaOptions::default()) {
            let p = b.points[0];
            assert!(p.ee1 >= p.ee2, "{} gamma {gamma}: {p:?}", b.scheme);
        }
    }
}

#[test]
fn symmetric_channels_give_equal_individual_ee() {
    // gamma = 1: a reflection swaps h1 and h2 up to a phase. For nearly
    // aligned channels serving one user beats every symmetric point, so only
    // angles with a symmetric optimum are checked.
    let ws = WeightSweep::new(vec![0.0]).unwrap();
    let opts = ScaOptions {
        epsilon: 1e-7,
        ..ScaOptions::default()
    };
    for theta in [2.0 * PI / 9.0, PI / 3.0, 4.0 * PI / 9.0, PI / 2.0] {
        let s = scenario(1.0, theta, 27.0);
        let p = sweep(SchemeKind::Sdma, &s, &ws, &opts).points[0];
        assert!((p.ee1 - p.ee2).abs() <= 1e-4, "theta {theta}: {p:?}");
    }
}

#[test]
fn individual_ee_adds_up_to_the_unweighted_objective() {
    let s = scenario(0.6, PI / 3.0, 30.0);
    let opts = ScaOptions::default();
    for kind in SchemeKind::ALL {
        let r = solve(kind, &s, &WeightVector::new(1.0, 2.5).unwrap(), &opts).unwrap();
        let unweighted = evaluate_ee(
            r.scheme_tag(),
            &r.precoders,
            Some(&r.split),
            &WeightVector::equal(),
            &s,
        )
        .unwrap();
        let sum = r.individual_ee[0] + r.individual_ee[1];
        assert!((sum - unweighted).abs() <= 1e-9 * unweighted, "{kind}");
        let weighted = r.individual_ee[0] + 2.5 * r.individual_ee[1];
        assert!((weighted - r.ee).abs() <= 1e-9 * r.ee, "{kind}");
    }
}

#[test]
fn sweep_is_invariant_under_exponent_reordering() {
    let s = scenario(0.3, PI / 9.0, 40.0);
    let opts = ScaOptions::default();
    let a = WeightSweep::new(vec![-1.0, 0.0, 0.35, 3.0]).unwrap();
    let b = WeightSweep::new(vec![0.35, 3.0, -1.0, 0.0]).unwrap();
    let ra = sweep_schemes(&SchemeKind::ALL, &s, &a, &opts);
    let rb = sweep_schemes(&SchemeKind::ALL, &s, &b, &opts);
    for (x, y) in ra.iter().zip(&rb) {
        let mut px = x.points.clone();
        let mut py = y.points.clone();
        px.sort_by(|p, q| p.u2.total_cmp(&q.u2));
        py.sort_by(|p, q| p.u2.total_cmp(&q.u2));
        assert_eq!(px, py, "{}", x.scheme);
    }
}

#[test]
fn rsma_boundary_covers_sdma_on_the_moderate_angle_example() {
    // gamma = 1, P_dyn = 27 dBm, theta = 2 pi / 9, tight stopping rule
    let s = scenario(1.0, 2.0 * PI / 9.0, 27.0);
    let opts = ScaOptions {
        epsilon: 1e-7,
        ..ScaOptions::default()
    };
    let r = sweep_schemes(
        &[SchemeKind::Rsma, SchemeKind::Sdma],
        &s,
        &WeightSweep::default(),
        &opts,
    );
    let (ok, violations) = region_dominates(&r[0], &r[1], 1e-6);
    assert!(ok, "{violations:?}");
    assert!(weighted_shortfalls(&r[0], &r[1], 1e-6).is_empty());
}

#[test]
fn region_csv_has_one_row_per_point() {
    let s = scenario(1.0, PI / 3.0, 40.0);
    let ws = WeightSweep::new(vec![-1.0, 1.0]).unwrap();
    let r = sweep_schemes(&SchemeKind::ALL, &s, &ws, &ScaOptions::default());
    let mut buf = Vec::new();
    write_region_csv(
        &mut buf,
        r.iter()
            .flat_map(|b| RegionRow::rows(b, 1.0, PI / 3.0, 40.0)),
    )
    .unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,gamma,theta,p_dyn_dbm,u2,ee1,ee2,wsr,power_w,iterations,converged"
    );
    assert_eq!(lines.count(), 6);
}
