//! Simplex against vertex enumeration, and Frank–Wolfe certificates.

use proptest::prelude::*;
use tsa_core::lp::{maximize_concave, solve_lp, ConcaveObjective, FwOptions, LpProblem, LpStatus};
use tsa_core::Deadline;

/// Solves the square system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// max c·x over {Ax ≤ b, x ≥ 0} by trying every basis of n tight constraints.
fn vertex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best = f64::NEG_INFINITY;
    let total = rows.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let sys: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = solve_square(sys, rhs) {
            if rows
                .iter()
                .all(|(ar, br)| ar.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= br + 1e-7)
            {
                best = best.max(c.iter().zip(&x).map(|(p, q)| p * q).sum());
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn lp_case() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(n, r)| {
        (
            prop::collection::vec(-1.0..2.0f64, n),
            prop::collection::vec(
                prop::collection::vec(prop_oneof![Just(0.0), -0.5..2.0f64], n),
                r,
            ),
            prop::collection::vec(0.0..3.0f64, r),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, a, b) in lp_case()) {
        let n = c.len();
        let mut p = LpProblem::new(n);
        p.objective = c.clone();
        for (row, rhs) in a.iter().zip(&b) {
            p.le(row.iter().enumerate().map(|(j, v)| (j, *v)).collect(), *rhs);
        }
        // a box keeps every instance bounded
        let mut boxed_a = a.clone();
        let mut boxed_b = b.clone();
        for j in 0..n {
            p.le(vec![(j, 1.0)], 5.0);
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            boxed_a.push(e);
            boxed_b.push(5.0);
        }
        let s = solve_lp(&p).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!(p.max_violation(&s.x) < 1e-8);
        let want = vertex_max(&c, &boxed_a, &boxed_b);
        prop_assert!((s.value - want).abs() < 1e-6, "simplex {} vs vertices {}", s.value, want);
        prop_assert!(s.complementary_slackness(&p) < 1e-6);
    }
}

struct Quadratic(Vec<f64>);

impl ConcaveObjective for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        -x.iter()
            .zip(&self.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        for (k, (a, b)) in x.iter().zip(&self.0).enumerate() {
            g[k] = -2.0 * (a - b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn frank_wolfe_certificate_brackets_box_optimum(target in prop::collection::vec(-1.0..2.0f64, 1..5)) {
        let n = target.len();
        let mut p = LpProblem::new(n);
        for j in 0..n {
            p.le(vec![(j, 1.0)], 1.0);
        }
        let r = maximize_concave(&Quadratic(target.clone()), &p, FwOptions::default(), &Deadline::none()).unwrap();
        let best = -target.iter().map(|t| (t - t.clamp(0.0, 1.0)).powi(2)).sum::<f64>();
        prop_assert!(r.certified_upper >= best - 1e-9);
        prop_assert!(r.value <= best + 1e-12);
        prop_assert!(r.bound_history.windows(2).all(|w| w[1] <= w[0]));
    }
}
