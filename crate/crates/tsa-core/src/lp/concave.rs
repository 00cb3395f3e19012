use super::simplex::{solve_lp_with, LpProblem, LpStatus};
use crate::error::Result;
use crate::limits::Deadline;

pub trait ConcaveObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
}

#[derive(Clone, Copy, Debug)]
pub struct FwOptions {
    pub max_iters: usize,
    pub gap_tol: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            max_iters: 500,
            gap_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcaveResult {
    pub status: LpStatus,
    pub point: Vec<f64>,
    pub value: f64,
    /// min over iterates of f(x_k) + ∇f(x_k)·(s_k − x_k).
    pub certified_upper: f64,
    /// Running certified bound after each iteration.
    pub bound_history: Vec<f64>,
    pub iterations: usize,
}

/// Frank–Wolfe over the polytope given by `feasible` (its objective is ignored).
pub fn maximize_concave(
    f: &dyn ConcaveObjective,
    feasible: &LpProblem,
    opts: FwOptions,
    deadline: &Deadline,
) -> Result<ConcaveResult> {
    let n = feasible.nvars();
    let mut lp = feasible.clone();
    let mut g = vec![0.0; n];
    let zero = vec![0.0; n];
    f.gradient(&zero, &mut g);
    lp.objective.copy_from_slice(&g);
    let start = solve_lp_with(&lp, deadline)?;
    if start.status != LpStatus::Optimal {
        return Ok(ConcaveResult {
            status: start.status,
            point: zero,
            value: f64::NAN,
            certified_upper: f64::NAN,
            bound_history: vec![],
            iterations: 0,
        });
    }
    let mut x = start.x;
    let mut fx = f.value(&x);
    let mut upper = f64::INFINITY;
    let mut history = Vec::new();
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        f.gradient(&x, &mut g);
        lp.objective.copy_from_slice(&g);
        let s = solve_lp_with(&lp, deadline)?.x;
        let gap: f64 = g
            .iter()
            .zip(s.iter().zip(&x))
            .map(|(gi, (si, xi))| gi * (si - xi))
            .sum();
        upper = upper.min(fx + gap.max(0.0));
        history.push(upper);
        if upper - fx <= opts.gap_tol {
            break;
        }
        let dir: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        let at = |t: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect() };
        // Golden-section search; φ(t) = f(x + t·dir) is concave on [0,1].
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut t1, mut t2) = (hi - r * (hi - lo), lo + r * (hi - lo));
        let (mut f1, mut f2) = (f.value(&at(t1)), f.value(&at(t2)));
        for _ in 0..60 {
            if f1 < f2 {
                lo = t1;
                t1 = t2;
                f1 = f2;
                t2 = lo + r * (hi - lo);
                f2 = f.value(&at(t2));
            } else {
                hi = t2;
                t2 = t1;
                f2 = f1;
                t1 = hi - r * (hi - lo);
                f1 = f.value(&at(t1));
            }
        }
        let mut best_t = 0.5 * (lo + hi);
        let mut best_f = f.value(&at(best_t));
        for t in [1.0, 0.0] {
            let v = f.value(&at(t));
            if v > best_f {
                best_f = v;
                best_t = t;
            }
        }
        if best_f >= fx {
            x = at(best_t);
            fx = best_f;
        }
        deadline.check()?;
    }
    Ok(ConcaveResult {
        status: LpStatus::Optimal,
        point: x,
        value: fx,
        certified_upper: upper.max(fx),
        bound_history: history,
        iterations: iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Vec<f64>);
    impl ConcaveObjective for Linear {
        fn value(&self, x: &[f64]) -> f64 {
            self.0.iter().zip(x).map(|(a, b)| a * b).sum()
        }
        fn gradient(&self, _: &[f64], g: &mut [f64]) {
            g.copy_from_slice(&self.0);
        }
    }

    struct Saturating;
    impl ConcaveObjective for Saturating {
        fn value(&self, x: &[f64]) -> f64 {
            x[0] / (1.0 + x[0])
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 1.0 / ((1.0 + x[0]) * (1.0 + x[0]));
        }
    }

    #[test]
    fn linear_matches_lp() {
        let mut p = LpProblem::new(2);
        p.le(vec![(0, 1.0), (1, 2.0)], 4.0);
        p.le(vec![(0, 3.0), (1, 1.0)], 6.0);
        let r = maximize_concave(
            &Linear(vec![1.0, 1.0]),
            &p,
            FwOptions::default(),
            &Deadline::none(),
        )
        .unwrap();
        assert!((r.certified_upper - 2.8).abs() < 1e-6, "{r:?}");
        assert!((r.value - 2.8).abs() < 1e-6);
    }

    #[test]
    fn saturating_closed_form() {
        let mut p = LpProblem::new(1);
        p.le(vec![(0, 1.0)], 1.0);
        let r = maximize_concave(&Saturating, &p, FwOptions::default(), &Deadline::none()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9);
        assert!(r.certified_upper >= 0.5 - 1e-12);
        assert!(r.bound_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_region() {
        let mut p = LpProblem::new(1);
        p.le(vec![(0, 1.0)], -1.0);
        let r = maximize_concave(&Saturating, &p, FwOptions::default(), &Deadline::none()).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
    }
}
