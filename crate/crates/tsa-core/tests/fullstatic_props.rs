//! Roundings, the high-value subproblem, the low-value LP and the combined algorithm.

use proptest::prelude::*;
use tsa_core::dp::opt_fully_static;
use tsa_core::fullstatic::{
    approx_fully_static, bilinear_alternation, dependent_rounding, highvalue_subproblem, lowlow_lp,
    mutual_value, ApproxOptions, SubproblemMode, ALPHA,
};
use tsa_core::generate::{generate_random_instance, rng_from_seed};
use tsa_core::{Assortment, CardinalityProfile, Instance, Limits, Side};

/// A fractional matrix whose row and column sums respect the caps.
fn capped_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Option<usize>>, Vec<Option<usize>>)>
{
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, m), n),
            prop::collection::vec(prop::option::of(1usize..=3), n),
            prop::collection::vec(prop::option::of(1usize..=3), m),
        )
            .prop_map(|(mut y, rc, cc)| {
                for (i, row) in y.iter_mut().enumerate() {
                    if let Some(k) = rc[i] {
                        let s: f64 = row.iter().sum();
                        if s > k as f64 {
                            row.iter_mut().for_each(|x| *x *= k as f64 / s);
                        }
                    }
                }
                for (j, k) in cc.iter().enumerate() {
                    if let Some(k) = k {
                        let s: f64 = y.iter().map(|r| r[j]).sum();
                        if s > *k as f64 {
                            y.iter_mut().for_each(|r| r[j] *= *k as f64 / s);
                        }
                    }
                }
                (y, rc, cc)
            })
    })
}

fn low_value_instance(n: usize, seed: u64) -> Instance {
    let inst = generate_random_instance(n, n, seed, CardinalityProfile::Unconstrained);
    let (v, w) = inst.mnl_matrices().unwrap();
    let squash = |x: &f64| ALPHA * 0.999 * x / (1.0 + x);
    Instance::mnl(
        v.iter()
            .map(|r| r.iter().map(|x| x * ALPHA * 0.999).collect())
            .collect(),
        w.iter().map(|r| r.iter().map(squash).collect()).collect(),
    )
    .unwrap()
}

/// Exhaustive optimum of the high-value subproblem, written independently.
fn highvalue_brute(inst: &Instance, side: Side, caps: bool) -> f64 {
    let (v, w) = inst.mnl_matrices().unwrap();
    let agents = inst.size(side);
    let partners = inst.size(side.opposite());
    let weight = |a: usize, b: usize| {
        if side == Side::Customers {
            v[a][b]
        } else {
            w[a][b]
        }
    };
    let budget = |a: usize| if caps { inst.budgets(side)[a] } else { None };
    // each partner picks one agent or none
    let mut best = 0.0f64;
    let total = (agents + 1).pow(partners as u32);
    for code in 0..total {
        let mut load = vec![0.0; agents];
        let mut count = vec![0usize; agents];
        let mut c = code;
        for b in 0..partners {
            let a = c % (agents + 1);
            c /= agents + 1;
            if a < agents {
                load[a] += weight(a, b);
                count[a] += 1;
            }
        }
        if (0..agents).all(|a| budget(a).is_none_or(|k| count[a] <= k)) {
            best = best.max(load.iter().map(|z| z / (1.0 + z)).sum());
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn dependent_rounding_respects_degrees((y, rc, cc) in capped_matrix(), seed in any::<u64>()) {
        let rows = dependent_rounding(&y, &rc, &cc, &mut rng_from_seed(seed)).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let s: f64 = y[i].iter().sum();
            prop_assert!(r.len() as f64 >= s.floor() - 1e-9 && r.len() as f64 <= s.ceil() + 1e-9);
            prop_assert!(rc[i].is_none_or(|k| r.len() <= k));
        }
        for j in 0..cc.len() {
            let s: f64 = y.iter().map(|r| r[j]).sum();
            let d = rows.iter().filter(|r| r.contains(j)).count() as f64;
            prop_assert!(d >= s.floor() - 1e-9 && d <= s.ceil() + 1e-9);
            prop_assert!(cc[j].is_none_or(|k| d as usize <= k));
        }
        for (i, r) in rows.iter().enumerate() {
            for j in 0..cc.len() {
                if y[i][j] == 0.0 { prop_assert!(!r.contains(j)); }
                if y[i][j] == 1.0 { prop_assert!(r.contains(j)); }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn highvalue_greedy_against_exhaustive(n in 1usize..=3, m in 1usize..=3, seed in any::<u64>(), k in 1usize..=2) {
        let base = generate_random_instance(n, m, seed, CardinalityProfile::Unconstrained);
        let all = vec![Assortment::full(m); n];
        let l = Limits::default();
        for side in [Side::Customers, Side::Suppliers] {
            let g = highvalue_subproblem(&base, &all, side, false, SubproblemMode::Greedy, &l).unwrap().value;
            let x = highvalue_subproblem(&base, &all, side, false, SubproblemMode::Exact, &l).unwrap().value;
            let b = highvalue_brute(&base, side, false);
            prop_assert!((x - b).abs() < 1e-12);
            prop_assert!(g >= 0.5 * b - 1e-12 && g <= b + 1e-12);
            let cons = base.clone().with_profile(CardinalityProfile::TwoWay { k_customer: k, k_supplier: k });
            let gc = highvalue_subproblem(&cons, &all, side, true, SubproblemMode::Greedy, &l).unwrap().value;
            let bc = highvalue_brute(&cons, side, true);
            prop_assert!(gc >= bc / 3.0 - 1e-12 && gc <= bc + 1e-12);
        }
    }
}

#[test]
fn lowlow_lp_bounds_static_optimum() {
    for seed in 0..20 {
        let inst = low_value_instance(3, seed);
        let z = lowlow_lp(&inst, false).unwrap().z_lp;
        let opt = opt_fully_static(&inst).unwrap().value;
        assert!(z >= opt - 1e-9, "seed {seed}: {z} < {opt}");
    }
}

#[test]
fn independent_rounding_marginals() {
    let inst = low_value_instance(2, 4);
    let y = lowlow_lp(&inst, false).unwrap().y;
    let mut rng = rng_from_seed(8);
    let draws = 100_000;
    let mut hits = vec![vec![0usize; 2]; 2];
    for _ in 0..draws {
        for (i, r) in tsa_core::fullstatic::independent_rounding(&y, &mut rng)
            .iter()
            .enumerate()
        {
            for j in r.iter() {
                hits[i][j] += 1;
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            assert!((hits[i][j] as f64 / draws as f64 - y[i][j]).abs() < 0.01);
        }
    }
}

#[test]
fn approx_and_bilinear_stay_below_optimum() {
    for seed in 0..10 {
        let inst = generate_random_instance(3, 3, seed, CardinalityProfile::Unconstrained);
        let opt = opt_fully_static(&inst).unwrap().value;
        let mut rng = rng_from_seed(seed);
        let r = approx_fully_static(
            &inst,
            ApproxOptions::default(),
            &mut rng,
            &Limits::default(),
        )
        .unwrap();
        assert!(r.solution.value <= opt + 1e-9 && r.solution.value >= 0.067 * opt - 1e-9);
        assert!((mutual_value(&inst, &r.solution.rows).unwrap() - r.solution.value).abs() < 1e-12);
        let exact = approx_fully_static(
            &inst,
            ApproxOptions {
                mode: SubproblemMode::Exact,
                ..ApproxOptions::default()
            },
            &mut rng_from_seed(seed),
            &Limits::default(),
        )
        .unwrap();
        assert!(exact.solution.value <= opt + 1e-9);
        let b = bilinear_alternation(&inst, 4, &mut rng).unwrap();
        assert!(b.solution.value <= opt + 1e-9 && b.z_b <= opt + 1e-9);
    }
}

#[test]
fn constrained_approx_respects_budgets() {
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
        let r = approx_fully_static(
            &inst,
            ApproxOptions::default(),
            &mut rng_from_seed(seed),
            &Limits::default(),
        )
        .unwrap();
        assert!(r.solution.rows.iter().all(|s| s.len() <= 1));
        for j in 0..3 {
            assert!(r.solution.rows.iter().filter(|s| s.contains(j)).count() <= 2);
        }
        assert!(r.solution.value <= opt_fully_static(&inst).unwrap().value + 1e-9);
    }
}
