use crate::error::{Error, Result};
use crate::limits::Deadline;

const PIVOT_TOL: f64 = 1e-9;
const RHS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// maximize c·x subject to rows, x ≥ 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LpProblem {
    pub fn new(nvars: usize) -> Self {
        LpProblem {
            objective: vec![0.0; nvars],
            rows: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    pub fn le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(coeffs, Sense::Le, rhs);
    }

    pub fn equal(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(coeffs, Sense::Eq, rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.nvars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("objective has a non-finite entry".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(Error::Invalid(format!("row {r} is malformed")));
            }
        }
        Ok(())
    }

    pub fn row_activity(&self, r: usize, x: &[f64]) -> f64 {
        self.rows[r].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for (r, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(r, x);
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per row: ≥ 0 for ≤ rows, ≤ 0 for ≥ rows.
    pub dual: Vec<f64>,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, p: &LpProblem) -> Self {
        LpSolution {
            status,
            x: vec![0.0; p.nvars()],
            value: 0.0,
            dual: vec![0.0; p.rows.len()],
        }
    }

    /// Σ_i |y_i (b_i − a_i x)| + Σ_j |x_j (c_j − y·A_j)|.
    pub fn complementary_slackness(&self, p: &LpProblem) -> f64 {
        let mut reduced = p.objective.clone();
        let mut res = 0.0;
        for (r, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced[j] -= self.dual[r] * a;
            }
            res += (self.dual[r] * (row.rhs - p.row_activity(r, &self.x))).abs();
        }
        res + self
            .x
            .iter()
            .zip(&reduced)
            .map(|(x, d)| (x * d).abs())
            .sum::<f64>()
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(p, &Deadline::none())
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// rows × (cols + 1), last column is the rhs.
    a: Vec<f64>,
    /// Reduced costs d_j = c_B B⁻¹ A_j − c_j plus the current value in the last slot.
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] *= inv;
        }
        let prow: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f != 0.0 {
                for (c, pv) in prow.iter().enumerate() {
                    self.a[r * w + c] -= f * pv;
                }
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (c, pv) in prow.iter().enumerate() {
                self.obj[c] -= f * pv;
            }
        }
        self.basis[pr] = pc;
    }

    fn set_objective(&mut self, c: &[f64]) {
        // d_j = Σ_r c_{B_r} a_{r,j} − c_j
        let w = self.cols + 1;
        self.obj = vec![0.0; w];
        for (j, cj) in c.iter().enumerate() {
            self.obj[j] = -cj;
        }
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for col in 0..w {
                    self.obj[col] += cb * self.a[r * w + col];
                }
            }
        }
    }

    /// Bland's rule; returns false when unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool, deadline: &Deadline) -> Result<bool> {
        for it in 0.. {
            if it >= MAX_PIVOTS {
                return Err(Error::Solver("simplex pivot limit reached".into()));
            }
            if it % 64 == 0 {
                deadline.check()?;
            }
            let Some(pc) = (0..self.cols).find(|&j| allowed(j) && self.obj[j] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        Some((br, bi))
                            if ratio > br + 1e-12
                                || (ratio >= br - 1e-12 && self.basis[r] > self.basis[bi]) =>
                        {
                            Some((br, bi))
                        }
                        _ => Some((ratio, r)),
                    };
                }
            }
            match best {
                Some((_, pr)) => self.pivot(pr, pc),
                None => return Ok(false),
            }
        }
        unreachable!()
    }
}

/// Dense two-phase tableau simplex with Bland's rule.
pub fn solve_lp_with(p: &LpProblem, deadline: &Deadline) -> Result<LpSolution> {
    p.validate()?;
    let n = p.nvars();
    let m = p.rows.len();
    // Columns: structural | one slack or surplus per inequality | one artificial per row.
    // Every row gets an identity column: its slack for ≤ rows with b ≥ 0, otherwise its artificial.
    let mut sign = vec![1.0; m];
    let mut sense = Vec::with_capacity(m);
    for (r, row) in p.rows.iter().enumerate() {
        let mut s = row.sense;
        if row.rhs < 0.0 {
            sign[r] = -1.0;
            s = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        sense.push(s);
    }
    let slack_of: Vec<Option<usize>> = {
        let mut next = n;
        sense
            .iter()
            .map(|s| match s {
                Sense::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let nslack = slack_of.iter().flatten().count();
    let art0 = n + nslack;
    let cols = art0 + m;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    for (r, row) in p.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            a[r * w + j] += sign[r] * v;
        }
        a[r * w + cols] = sign[r] * row.rhs;
        if let Some(sc) = slack_of[r] {
            a[r * w + sc] = if sense[r] == Sense::Le { 1.0 } else { -1.0 };
        }
        a[r * w + art0 + r] = 1.0;
        basis[r] = if sense[r] == Sense::Le {
            slack_of[r].unwrap()
        } else {
            art0 + r
        };
    }
    let mut t = Tableau {
        rows: m,
        cols,
        a,
        obj: vec![],
        basis,
    };

    let needs_phase1 = sense.iter().any(|s| *s != Sense::Le);
    if needs_phase1 {
        let mut c1 = vec![0.0; cols];
        for (r, s) in sense.iter().enumerate() {
            if *s != Sense::Le {
                c1[art0 + r] = -1.0;
            }
        }
        t.set_objective(&c1);
        t.optimize(&|_| true, deadline)?;
        if -t.obj[cols] > RHS_TOL {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, p));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }
    let mut c2 = vec![0.0; cols];
    c2[..n].copy_from_slice(&p.objective);
    t.set_objective(&c2);
    if !t.optimize(&|j| j < art0, deadline)? {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, p));
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    // The artificial column of row r started as e_r, so its reduced cost is (c_B B⁻¹)_r.
    let dual = (0..m).map(|r| sign[r] * t.obj[art0 + r]).collect();
    let value = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.le(vec![(0, 1.0)], 1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tighter_of_two() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.le(vec![(0, 2.0)], 1.0);
        p.le(vec![(0, 1.0)], 0.4);
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 0.4).abs() < 1e-12);
        assert!(s.complementary_slackness(&p) < 1e-9);
    }

    #[test]
    fn low_value_one_by_one() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 0.25;
        p.le(vec![(0, 1.5)], 1.0);
        p.le(vec![(0, 1.5)], 1.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.value - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.le(vec![(0, 1.0)], 1.0);
        p.add_row(vec![(0, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
        let mut q = LpProblem::new(2);
        q.objective = vec![1.0, 0.0];
        q.le(vec![(1, 1.0)], 1.0);
        assert_eq!(solve_lp(&q).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_duals() {
        // max x + 2y s.t. x + y = 1, x - y ≥ -0.5
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 2.0];
        p.equal(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Ge, -0.5);
        let s = solve_lp(&p).unwrap();
        assert!((s.value - 1.75).abs() < 1e-9, "{s:?}");
        assert!(p.max_violation(&s.x) < 1e-8);
        assert!(s.complementary_slackness(&p) < 1e-6);
        assert!(s.dual[1] <= 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 1.0];
        p.equal(vec![(0, 1.0), (1, 1.0)], 1.0);
        p.equal(vec![(0, 2.0), (1, 2.0)], 2.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-9);
    }
}
