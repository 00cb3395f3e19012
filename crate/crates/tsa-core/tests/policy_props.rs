//! Optima nesting, exact evaluation and greedy guarantees on small random markets.

use proptest::prelude::*;
use tsa_core::dp::{
    opt_fully_adaptive_with, opt_fully_static, opt_one_sided_adaptive, opt_os, DpSearch,
};
use tsa_core::exec::Exec;
use tsa_core::generate::generate_random_instance;
use tsa_core::greedy::{
    cointoss_fully_adaptive, greedy_one_sided, sampling_side_selector, SamplingConfig,
};
use tsa_core::policy::{exact_value_deterministic_adaptive, exact_value_static, monte_carlo};
use tsa_core::{Assortment, CardinalityProfile, Instance, Limits, Side};

const E_RATIO: f64 = std::f64::consts::E / (std::f64::consts::E - 1.0);

/// Σ_{i,j} [j ∈ S_i][i ∈ C_j] v_ij/(1+v_i(S_i)) · w_ji/(1+w_j(C_j)) for MNL markets.
fn mnl_static_value(inst: &Instance, c: &[Assortment], s: &[Assortment]) -> f64 {
    let (v, w) = inst.mnl_matrices().unwrap();
    let mut total = 0.0;
    for i in 0..inst.n() {
        let di = 1.0 + c[i].iter().map(|j| v[i][j]).sum::<f64>();
        for j in c[i].iter().filter(|&j| s[j].contains(i)) {
            let dj = 1.0 + s[j].iter().map(|k| w[j][k]).sum::<f64>();
            total += v[i][j] / di * w[j][i] / dj;
        }
    }
    total
}

fn small() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=3, 1usize..=3, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optima_nest((n, m, seed) in small()) {
        let inst = generate_random_instance(n, m, seed, CardinalityProfile::Unconstrained);
        let l = Limits::default();
        let fs = opt_fully_static(&inst).unwrap().value;
        let os = opt_os(&inst, &l).unwrap();
        let oa = opt_one_sided_adaptive(&inst, Side::Customers).unwrap().value.max(opt_one_sided_adaptive(&inst, Side::Suppliers).unwrap().value);
        let fa = opt_fully_adaptive_with(&inst, &l, DpSearch::Oracle).unwrap().value;
        prop_assert!(fs <= os + 1e-9 && os <= oa + 1e-9 && oa <= fa + 1e-9, "{fs} {os} {oa} {fa}");
        prop_assert!(fa <= 2.0 * oa + 1e-9);
        prop_assert!(oa <= E_RATIO * os + 1e-9);
    }

    #[test]
    fn fa_oracle_search_matches_enumeration((n, m, seed) in (1usize..=2, 1usize..=3, any::<u64>())) {
        let inst = generate_random_instance(n, m, seed, CardinalityProfile::Unconstrained);
        let l = Limits::default();
        let a = opt_fully_adaptive_with(&inst, &l, DpSearch::Oracle).unwrap().value;
        let b = opt_fully_adaptive_with(&inst, &l, DpSearch::Enumerate).unwrap().value;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn static_value_is_symmetric_and_matches_formula((n, m, seed) in small(), cb in any::<u64>(), sb in any::<u64>()) {
        let inst = generate_random_instance(n, m, seed, CardinalityProfile::Unconstrained);
        let c: Vec<Assortment> = (0..n).map(|i| Assortment::from_bits((cb >> (4 * i)) & ((1 << m) - 1))).collect();
        let s: Vec<Assortment> = (0..m).map(|j| Assortment::from_bits((sb >> (4 * j)) & ((1 << n) - 1))).collect();
        let v = exact_value_static(&inst, &c, &s).unwrap();
        prop_assert!((v - exact_value_static(&inst.transposed(), &s, &c).unwrap()).abs() < 1e-12);
        prop_assert!((v - mnl_static_value(&inst, &c, &s)).abs() < 1e-12);
    }

    #[test]
    fn greedy_guarantees((n, m, seed) in small().prop_filter("n+m<=6", |(n, m, _)| n + m <= 6)) {
        let inst = generate_random_instance(n, m, seed, CardinalityProfile::Unconstrained);
        for side in [Side::Customers, Side::Suppliers] {
            let g = greedy_one_sided(&inst, side, None).unwrap();
            let opt = opt_one_sided_adaptive(&inst, side).unwrap().value;
            prop_assert!(exact_value_deterministic_adaptive(&inst, &g).unwrap() >= 0.5 * opt - 1e-9);
        }
        let fa = opt_fully_adaptive_with(&inst, &Limits::default(), DpSearch::Oracle).unwrap().value;
        let c = cointoss_fully_adaptive(&inst, seed).unwrap();
        prop_assert!(c.exact_value(&inst, &Limits::default()).unwrap() >= 0.25 * fa - 1e-9);
    }

    #[test]
    fn constrained_greedy_guarantee((n, m, seed) in small().prop_filter("n+m<=6", |(n, m, _)| n + m <= 6), k in 1usize..=2) {
        let inst = generate_random_instance(n, m, seed, CardinalityProfile::TwoWay { k_customer: k, k_supplier: k });
        for side in [Side::Customers, Side::Suppliers] {
            let g = greedy_one_sided(&inst, side, None).unwrap();
            let opt = opt_one_sided_adaptive(&inst, side).unwrap().value;
            prop_assert!(exact_value_deterministic_adaptive(&inst, &g).unwrap() >= 0.5 * opt - 1e-9);
        }
    }
}

#[test]
fn unit_pair_simulation_rate() {
    let inst = Instance::mnl(vec![vec![1.0]], vec![vec![1.0]]).unwrap();
    let g = greedy_one_sided(&inst, Side::Customers, None).unwrap();
    let r = monte_carlo(&inst, &g, 100_000, 3).unwrap();
    assert!((r.mean - 0.25).abs() < 0.01);
}

#[test]
fn monte_carlo_intervals_cover_exact_values() {
    let mut covered = 0;
    let mut cond_covered = 0;
    for seed in 0..20 {
        let inst = generate_random_instance(3, 3, seed, CardinalityProfile::Unconstrained);
        let g = greedy_one_sided(&inst, Side::Customers, None).unwrap();
        let exact = exact_value_deterministic_adaptive(&inst, &g).unwrap();
        let plain = monte_carlo(&inst, &g, 4000, seed).unwrap();
        let cond = g
            .conditional_monte_carlo(&inst, 4000, seed, Exec::Sequential)
            .unwrap();
        covered += ((plain.mean - exact).abs() <= plain.half_width) as usize;
        cond_covered += ((cond.mean - exact).abs() <= cond.half_width) as usize;
        assert!(cond.half_width < plain.half_width);
    }
    // 95% intervals; 16 of 20 is far in the tail of Binomial(20, 0.95)
    assert!(
        covered >= 16 && cond_covered >= 16,
        "{covered} {cond_covered}"
    );
}

#[test]
fn monte_carlo_is_seed_deterministic_across_exec_modes() {
    let inst = generate_random_instance(3, 2, 9, CardinalityProfile::Unconstrained);
    let g = greedy_one_sided(&inst, Side::Suppliers, None).unwrap();
    let a = tsa_core::policy::monte_carlo_with(&inst, &g, 500, 5, Exec::Sequential).unwrap();
    let b = tsa_core::policy::monte_carlo_with(&inst, &g, 500, 5, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn selector_prefers_customers_on_prop1() {
    let inst = tsa_core::generate::tight_instance(tsa_core::generate::TightKind::Prop1, 2).unwrap();
    let picks = (0..20)
        .filter(|&s| {
            sampling_side_selector(&inst, &SamplingConfig::default(), s)
                .unwrap()
                .side
                == Side::Customers
        })
        .count();
    assert_eq!(picks, 20);
}
