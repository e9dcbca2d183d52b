mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rsma_ee::oracle::*;
use rsma_ee::sca::{solve, ScaOptions};
use rsma_ee::scenario::{PowerModel, Scenario};
use rsma_ee::schemes::*;

use common::{single_user_best, ScalarModel};

fn nt1(gamma: f64, p_dyn: f64) -> (Scenario, ScalarModel) {
    let s =
        Scenario::two_user(gamma, 0.0, 1, PowerModel::from_dbm(40.0, p_dyn, 30.0, 0.35)).unwrap();
    let m = ScalarModel {
        g: [1.0, gamma * gamma],
        eta: 0.35,
        p_cir: common::watts(p_dyn) + 1.0,
        p_t: 10.0,
    };
    (s, m)
}

fn small(steps: usize) -> GridSpec {
    GridSpec {
        power_steps: steps,
        split_steps: steps,
        ..GridSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn power_grid_matches_closed_form_search(
        gamma in 0.1f64..1.0, p_dyn in prop::sample::select(common::P_DYN_SET.to_vec()),
        e in -1.5f64..1.5,
    ) {
        let (s, m) = nt1(gamma, p_dyn);
        let u = [1.0, 10f64.powf(e)];
        let w = WeightVector::new(u[0], u[1]).unwrap();
        for (kind, name) in [(SchemeKind::Sdma, "sdma"), (SchemeKind::Noma, "noma"), (SchemeKind::Rsma, "rsma")] {
            let r = grid_ee_nt1(kind, &s, &w, &small(31)).unwrap();
            let reference = m.grid_best(name, u, 31);
            prop_assert!((r.best_ee - reference).abs() <= 1e-12 * reference, "{name}: {} vs {reference}", r.best_ee);
        }
    }

    #[test]
    fn refinement_never_decreases(gamma in 0.1f64..1.0, e in -1.0f64..1.0) {
        let (s, _) = nt1(gamma, 27.0);
        let w = WeightVector::new(1.0, 10f64.powf(e)).unwrap();
        for kind in SchemeKind::ALL {
            let coarse = grid_ee_nt1(kind, &s, &w, &small(11)).unwrap();
            let fine = grid_ee_nt1(kind, &s, &w, &small(11).refined()).unwrap();
            prop_assert!(fine.best_ee >= coarse.best_ee);
        }
        let s2 = Scenario::two_user(gamma, 1.0, 2, PowerModel::default()).unwrap();
        let g = GridSpec::uniform(3);
        let coarse = grid_ee_span(SchemeKind::Sdma, &s2, &w, &g).unwrap();
        let fine = grid_ee_span(SchemeKind::Sdma, &s2, &w, &g.refined()).unwrap();
        prop_assert!(fine.best_ee >= coarse.best_ee);
    }
}

#[test]
fn zero_power_point_is_never_the_maximizer() {
    let (s, _) = nt1(0.5, 30.0);
    let w = WeightVector::equal();
    let zero = PrecoderSet::zeros(1, false);
    assert_eq!(evaluate_ee(Scheme::Sdma, &zero, None, &w, &s).unwrap(), 0.0);
    for kind in SchemeKind::ALL {
        let r = grid_ee_nt1(kind, &s, &w, &small(21)).unwrap();
        assert!(r.best_ee > 0.0);
        assert!(r.best_point.powers.iter().sum::<f64>() > 0.0);
    }
}

#[test]
fn single_user_reduction_matches_one_dimensional_search() {
    for (gamma, p_dyn) in [(0.3, 20.0), (1.0, 30.0), (0.7, 40.0)] {
        let (s, m) = nt1(gamma, p_dyn);
        let w = WeightVector::new(1.0, 0.0).unwrap();
        let r = grid_ee_nt1(SchemeKind::Sdma, &s, &w, &GridSpec::default()).unwrap();
        let exact = single_user_best(1.0, m.eta, m.p_cir, m.p_t);
        assert!(r.best_ee <= exact * (1.0 + 1e-12));
        assert!(
            (exact - r.best_ee) / exact <= 1e-3,
            "{} vs {exact}",
            r.best_ee
        );
        let (_, lib) = single_user_ee_max(1.0, 1.0, 1.0, m.eta, m.p_cir, m.p_t);
        assert!((lib - exact).abs() <= 1e-9 * exact);
    }
}

#[test]
fn rsma_oracle_contains_the_others() {
    for (gamma, e) in [(0.3, 0.0), (1.0, 0.5), (0.6, -0.7)] {
        let (s, _) = nt1(gamma, 27.0);
        let w = WeightVector::new(1.0, 10f64.powf(e)).unwrap();
        let g = small(41);
        let rs = grid_ee_nt1(SchemeKind::Rsma, &s, &w, &g).unwrap().best_ee;
        let sd = grid_ee_nt1(SchemeKind::Sdma, &s, &w, &g).unwrap().best_ee;
        let no = grid_ee_nt1(SchemeKind::Noma, &s, &w, &g).unwrap().best_ee;
        assert!(rs >= sd.max(no));
    }
}

#[test]
fn returned_points_are_on_grid_and_feasible() {
    let (s, _) = nt1(0.4, 27.0);
    let w = WeightVector::new(1.0, 2.0).unwrap();
    let g = small(21);
    for kind in SchemeKind::ALL {
        let r = grid_ee_nt1(kind, &s, &w, &g).unwrap();
        let bp = &r.best_point;
        let step = s.p_t() / 20.0;
        for p in bp.powers {
            assert!((p / step - (p / step).round()).abs() < 1e-9);
        }
        assert!(bp.precoders.transmit_power() <= s.p_t() * (1.0 + 1e-12));
        let again = evaluate(bp.scheme, &bp.precoders, Some(&bp.split), &w, &s).unwrap();
        assert_eq!(again.ee, r.best_ee);
        if let Some(rc) = again.common_rate {
            assert!(bp.split.total() <= rc + 1e-12);
        }
    }
}

#[test]
fn orthogonal_sdma_approaches_waterfilled_matched_filter() {
    // nt = 2, h1 = [1, 1], h2 = gamma [1, -1]: orthogonal, so SDMA decouples
    let gamma = 0.8;
    let s = Scenario::two_user(gamma, PI, 2, PowerModel::from_dbm(40.0, 27.0, 30.0, 0.35)).unwrap();
    let w = WeightVector::equal();
    let (g1, g2) = (2.0, 2.0 * gamma * gamma);
    let p_cir = 2.0 * common::watts(27.0) + 1.0;
    let f = |p1: f64, p2: f64| {
        ((1.0 + g1 * p1).log2() + (1.0 + g2 * p2).log2()) / ((p1 + p2) / 0.35 + p_cir)
    };
    let best = common::ternary_max(
        |p1| common::ternary_max(|p2| f(p1, p2), 0.0, 10.0 - p1),
        0.0,
        10.0,
    );
    let mut last_gap = f64::INFINITY;
    for steps in [5, 9, 17, 33] {
        let g = GridSpec {
            power_steps: steps,
            split_steps: 2,
            span_coeff_steps: 2,
            phase_steps: 1,
        };
        let r = grid_ee_span(SchemeKind::Sdma, &s, &w, &g).unwrap();
        let gap = (best - r.best_ee) / best;
        assert!(
            gap >= -1e-12 && gap <= last_gap + 1e-15,
            "steps {steps}: {gap}"
        );
        last_gap = gap;
    }
    assert!(last_gap < 1e-2);
}

#[test]
fn coarse_span_grid_fits_the_cap_at_four_antennas() {
    let s = Scenario::two_user(1.0, 2.0 * PI / 9.0, 4, PowerModel::default()).unwrap();
    let w = WeightVector::equal();
    let g = GridSpec::uniform(5);
    for kind in SchemeKind::ALL {
        assert!(census_span(kind, &g) <= DEFAULT_CENSUS_CAP);
    }
    let r = grid_ee_span(SchemeKind::Noma, &s, &w, &g).unwrap();
    assert_eq!(r.census, census_span(SchemeKind::Noma, &g));
    // the span oracle is a lower bound for SCA
    let sca = solve(SchemeKind::Noma, &s, &w, &ScaOptions::default()).unwrap();
    assert!(sca.ee >= r.best_ee - 1e-6);
}

#[test]
fn json_export_has_the_documented_fields() {
    let (s, _) = nt1(0.5, 30.0);
    let r = grid_ee_nt1(SchemeKind::Sdma, &s, &WeightVector::equal(), &small(11)).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for key in ["best_ee", "best_point", "census", "wall_time_s"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["census"], 66);
}
