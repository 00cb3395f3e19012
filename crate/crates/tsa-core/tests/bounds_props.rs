//! Relaxations and upper bounds against the exact optima.

use tsa_core::bounds::{gap_report, lp_relaxation_onesided, ub_fa, ub_oa, GapOptions};
use tsa_core::dp::{opt_fully_adaptive, opt_oa, opt_one_sided_adaptive, opt_os};
use tsa_core::generate::generate_random_instance;
use tsa_core::{CardinalityProfile, Limits, Side};

const E_RATIO: f64 = std::f64::consts::E / (std::f64::consts::E - 1.0);

#[test]
fn relaxation_brackets_one_sided_optima() {
    for seed in 0..20 {
        let inst = generate_random_instance(3, 3, seed, CardinalityProfile::Unconstrained);
        let os = opt_os(&inst, &Limits::default()).unwrap();
        for side in [Side::Customers, Side::Suppliers] {
            let r = lp_relaxation_onesided(&inst, side, false).unwrap();
            let oa = opt_one_sided_adaptive(&inst, side).unwrap().value;
            assert!(r.value >= oa - 1e-6, "seed {seed}");
            assert!(r.value <= E_RATIO * os + 1e-9, "seed {seed}");
            assert!(r.independent_value >= (1.0 - (-1f64).exp()) * r.value - 1e-9);
            // flow rows: Σ_{C∋i} λ_jC = p_ij
            let o = inst.oriented(side);
            for i in 0..o.n() {
                for j in 0..o.m() {
                    let lam: f64 = r.lambda[j]
                        .iter()
                        .filter(|(c, _)| c.contains(i))
                        .map(|x| x.1)
                        .sum();
                    let p: f64 = r.tau[i]
                        .iter()
                        .map(|(s, t)| t * o.customers[i].prob(j, *s).unwrap())
                        .sum();
                    assert!((lam - p).abs() < 1e-8);
                }
            }
        }
    }
}

#[test]
fn constrained_relaxation_bounds_constrained_optimum() {
    for seed in 0..10 {
        let inst = generate_random_instance(
            3,
            3,
            seed,
            CardinalityProfile::TwoWay {
                k_customer: 1,
                k_supplier: 2,
            },
        );
        let r = lp_relaxation_onesided(&inst, Side::Customers, true).unwrap();
        assert!(r.tau.iter().flatten().all(|(s, _)| s.len() <= 1));
        assert!(
            r.value
                >= opt_one_sided_adaptive(&inst, Side::Customers)
                    .unwrap()
                    .value
                    - 1e-6
        );
    }
}

#[test]
fn upper_bounds_dominate_optima() {
    for (n, seeds) in [(2usize, 20u64), (3, 20)] {
        for seed in 0..seeds {
            let inst = generate_random_instance(n, n, seed, CardinalityProfile::Unconstrained);
            let oa = opt_oa(&inst, &Limits::default()).unwrap();
            let fa = opt_fully_adaptive(&inst).unwrap().value;
            assert!(ub_oa(&inst).unwrap().value >= oa - 1e-6);
            assert!(ub_fa(&inst).unwrap() >= fa - 1e-6);
        }
    }
}

#[test]
fn two_by_two_reports_pass() {
    for seed in 0..10 {
        let inst = generate_random_instance(2, 2, seed, CardinalityProfile::Unconstrained);
        let r = gap_report(
            &inst,
            &GapOptions {
                seed,
                ..GapOptions::default()
            },
        );
        assert!(r.unavailable.is_empty(), "{:?}", r.unavailable);
        assert!(r.all_pass(), "{:?}", r.verdicts);
    }
}

#[test]
fn availability_follows_caps() {
    let inst = generate_random_instance(5, 5, 0, CardinalityProfile::Unconstrained);
    let r = gap_report(
        &inst,
        &GapOptions {
            quantities: Some(vec!["opt_fs".into(), "opt_os".into(), "ub_fa".into()]),
            ..GapOptions::default()
        },
    );
    assert!(r.get("opt_fs").is_none() && r.get("opt_os").is_none());
    assert!(r.get("ub_fa").is_some());
    assert!(r.ratio("opt_os", "opt_fs").is_none());
}
