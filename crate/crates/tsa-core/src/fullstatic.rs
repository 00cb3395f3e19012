use crate::assortment::Assortment;
use crate::dp::mutual_displays;
use crate::error::{cap, Error, Result};
use crate::generate::TsaRng;
use crate::instance::{Budget, Instance, Side};
use crate::limits::Limits;
use crate::lp::{solve_lp, LpProblem, LpStatus};
use crate::policy::exact_value_static;
use rand::Rng;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Regime threshold balancing the three guarantees.
pub const ALPHA: f64 = 0.7574;

/// Edge sets stored as customer rows of supplier ids.
pub type EdgeRows = Vec<Assortment>;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgePartition {
    /// w_ji ≥ α
    pub e1: EdgeRows,
    /// v_ij ≥ α and w_ji < α
    pub e2: EdgeRows,
    pub e3: EdgeRows,
}

pub fn edge_partition(v: &[Vec<f64>], w: &[Vec<f64>], alpha: f64) -> EdgePartition {
    let n = v.len();
    let m = w.len();
    let mut p = EdgePartition {
        e1: vec![Assortment::EMPTY; n],
        e2: vec![Assortment::EMPTY; n],
        e3: vec![Assortment::EMPTY; n],
    };
    for i in 0..n {
        for j in 0..m {
            let row = if w[j][i] >= alpha {
                &mut p.e1[i]
            } else if v[i][j] >= alpha {
                &mut p.e2[i]
            } else {
                &mut p.e3[i]
            };
            *row = row.with(j);
        }
    }
    p
}

fn all_edges(n: usize, m: usize) -> EdgeRows {
    vec![Assortment::full(m); n]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowLowSolution {
    pub y: Vec<Vec<f64>>,
    pub z_lp: f64,
}

pub fn lowlow_lp(inst: &Instance, constrained: bool) -> Result<LowLowSolution> {
    lowlow_lp_on(inst, &all_edges(inst.n(), inst.m()), constrained)
}

/// max Σ v_ij w_ji y_ij s.t. y_ij + Σ_ℓ v_iℓ y_iℓ ≤ 1, y_ij + Σ_k w_jk y_kj ≤ 1 over `edges`,
/// plus row and column budgets when `constrained`.
pub fn lowlow_lp_on(
    inst: &Instance,
    edges: &[Assortment],
    constrained: bool,
) -> Result<LowLowSolution> {
    let (v, w) = inst.mnl_matrices()?;
    let (n, m) = (inst.n(), inst.m());
    let mut id = vec![vec![usize::MAX; m]; n];
    let mut list = Vec::new();
    for (i, row) in edges.iter().enumerate() {
        for j in row.iter() {
            id[i][j] = list.len();
            list.push((i, j));
        }
    }
    let mut p = LpProblem::new(list.len());
    for (e, &(i, j)) in list.iter().enumerate() {
        p.objective[e] = v[i][j] * w[j][i];
        let mut cust: Vec<(usize, f64)> = edges[i].iter().map(|l| (id[i][l], v[i][l])).collect();
        cust.iter_mut().find(|c| c.0 == e).unwrap().1 += 1.0;
        p.le(cust, 1.0);
        let mut supp: Vec<(usize, f64)> = (0..n)
            .filter(|&k| edges[k].contains(j))
            .map(|k| (id[k][j], w[j][k]))
            .collect();
        supp.iter_mut().find(|c| c.0 == e).unwrap().1 += 1.0;
        p.le(supp, 1.0);
    }
    if constrained {
        for i in 0..n {
            if let Some(k) = inst.k_customer[i] {
                p.le(edges[i].iter().map(|j| (id[i][j], 1.0)).collect(), k as f64);
            }
        }
        for j in 0..m {
            if let Some(k) = inst.k_supplier[j] {
                p.le(
                    (0..n)
                        .filter(|&i| edges[i].contains(j))
                        .map(|i| (id[i][j], 1.0))
                        .collect(),
                    k as f64,
                );
            }
        }
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "low-value LP ended {:?}",
            sol.status
        )));
    }
    let mut y = vec![vec![0.0; m]; n];
    for (e, &(i, j)) in list.iter().enumerate() {
        y[i][j] = sol.x[e].clamp(0.0, 1.0);
    }
    Ok(LowLowSolution { y, z_lp: sol.value })
}

/// Keeps each edge independently with probability y_ij.
pub fn independent_rounding(y: &[Vec<f64>], rng: &mut TsaRng) -> EdgeRows {
    y.iter()
        .map(|row| {
            Assortment::from_indices(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| rng.gen::<f64>() < **p)
                    .map(|(j, _)| j),
            )
        })
        .collect()
}

const FRAC_EPS: f64 = 1e-12;

/// Bipartite dependent rounding: marginals preserved, every row and column degree ends
/// between the floor and ceiling of its fractional degree.
pub fn dependent_rounding(
    y: &[Vec<f64>],
    row_caps: &[Budget],
    col_caps: &[Budget],
    rng: &mut TsaRng,
) -> Result<EdgeRows> {
    let n = y.len();
    let m = col_caps.len();
    if row_caps.len() != n || y.iter().any(|r| r.len() != m) {
        return Err(Error::Invalid("rounding input dimensions disagree".into()));
    }
    for (i, k) in row_caps.iter().enumerate() {
        if let Some(k) = k {
            if y[i].iter().sum::<f64>() > *k as f64 + 1e-9 {
                return Err(Error::Invalid(format!(
                    "row {i} exceeds its cap before rounding"
                )));
            }
        }
    }
    for (j, k) in col_caps.iter().enumerate() {
        if let Some(k) = k {
            if (0..n).map(|i| y[i][j]).sum::<f64>() > *k as f64 + 1e-9 {
                return Err(Error::Invalid(format!(
                    "column {j} exceeds its cap before rounding"
                )));
            }
        }
    }
    let snap = |x: f64| {
        if x < FRAC_EPS {
            0.0
        } else if x > 1.0 - FRAC_EPS {
            1.0
        } else {
            x
        }
    };
    let mut y: Vec<Vec<f64>> = y
        .iter()
        .map(|r| r.iter().map(|&x| snap(x.clamp(0.0, 1.0))).collect())
        .collect();
    let frac = |y: &Vec<Vec<f64>>, i: usize, j: usize| y[i][j] > 0.0 && y[i][j] < 1.0;
    // vertices: customers 0..n, suppliers n..n+m
    let neighbors = |y: &Vec<Vec<f64>>, v: usize| -> Vec<usize> {
        if v < n {
            (0..m).filter(|&j| frac(y, v, j)).map(|j| n + j).collect()
        } else {
            (0..n).filter(|&i| frac(y, i, v - n)).collect()
        }
    };
    let edge = |a: usize, b: usize| if a < n { (a, b - n) } else { (b, a - n) };
    loop {
        let degs: Vec<usize> = (0..n + m).map(|v| neighbors(&y, v).len()).collect();
        let Some(start) = degs
            .iter()
            .position(|&d| d == 1)
            .or_else(|| degs.iter().position(|&d| d > 0))
        else {
            break;
        };
        let mut path = vec![start];
        let mut walk: Vec<(usize, usize)> = Vec::new();
        loop {
            let cur = *path.last().unwrap();
            let prev = if path.len() > 1 {
                Some(path[path.len() - 2])
            } else {
                None
            };
            let Some(next) = neighbors(&y, cur).into_iter().find(|&u| Some(u) != prev) else {
                break;
            };
            walk.push(edge(cur, next));
            if let Some(pos) = path.iter().position(|&u| u == next) {
                walk.drain(..pos);
                break;
            }
            path.push(next);
        }
        let (mut a, mut b) = (f64::INFINITY, f64::INFINITY);
        for (k, &(i, j)) in walk.iter().enumerate() {
            let (up, down) = (1.0 - y[i][j], y[i][j]);
            if k % 2 == 0 {
                a = a.min(up);
                b = b.min(down);
            } else {
                a = a.min(down);
                b = b.min(up);
            }
        }
        let shift = if rng.gen::<f64>() < b / (a + b) {
            a
        } else {
            -b
        };
        for (k, &(i, j)) in walk.iter().enumerate() {
            let d = if k % 2 == 0 { shift } else { -shift };
            y[i][j] = snap(y[i][j] + d);
        }
    }
    Ok(y.iter()
        .map(|r| {
            Assortment::from_indices(
                r.iter()
                    .enumerate()
                    .filter(|(_, x)| **x >= 0.5)
                    .map(|(j, _)| j),
            )
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubproblemMode {
    Greedy,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HighValueSolution {
    pub rows: EdgeRows,
    pub value: f64,
}

fn saturate(z: f64) -> f64 {
    z / (1.0 + z)
}

#[derive(PartialEq)]
struct Cand(f64, usize);
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

/// max Σ_a F(Σ_b u_ab y_ab) with each partner b given to at most one agent a (and at most K_a
/// partners per agent when constrained). `side` names the agents: customers weigh suppliers by
/// v, suppliers weigh customers by w. Edges are restricted to `edges`.
pub fn highvalue_subproblem(
    inst: &Instance,
    edges: &[Assortment],
    side: Side,
    constrained: bool,
    mode: SubproblemMode,
    limits: &Limits,
) -> Result<HighValueSolution> {
    let (v, w) = inst.mnl_matrices()?;
    let list: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |j| (i, j)))
        .collect();
    // (agent, partner, weight) per edge
    let elems: Vec<(usize, usize, f64)> = list
        .iter()
        .map(|&(i, j)| match side {
            Side::Customers => (i, j, v[i][j]),
            Side::Suppliers => (j, i, w[j][i]),
        })
        .collect();
    let agents = inst.size(side);
    let partners = inst.size(side.opposite());
    let budget: Vec<Budget> = if constrained {
        inst.budgets(side).to_vec()
    } else {
        vec![None; agents]
    };
    let objective = |chosen: &[usize]| -> f64 {
        let mut load = vec![0.0; agents];
        for &e in chosen {
            load[elems[e].0] += elems[e].2;
        }
        load.into_iter().map(saturate).sum()
    };
    let chosen: Vec<usize> = match mode {
        SubproblemMode::Greedy => {
            let mut load = vec![0.0; agents];
            let mut count = vec![0usize; agents];
            let mut taken = vec![false; partners];
            let mut heap: BinaryHeap<Cand> = elems
                .iter()
                .enumerate()
                .map(|(e, x)| Cand(saturate(x.2), e))
                .collect();
            let mut chosen = Vec::new();
            while let Some(Cand(_, e)) = heap.pop() {
                let (a, b, u) = elems[e];
                if taken[b] || budget[a].is_some_and(|k| count[a] >= k) {
                    continue;
                }
                let gain = saturate(load[a] + u) - saturate(load[a]);
                if gain <= 1e-15 {
                    continue;
                }
                if heap.peek().is_some_and(|top| top.0 > gain + 1e-15) {
                    heap.push(Cand(gain, e));
                    continue;
                }
                chosen.push(e);
                taken[b] = true;
                count[a] += 1;
                load[a] += u;
            }
            chosen
        }
        SubproblemMode::Exact => {
            cap(
                "edges in an exact high-value subproblem",
                elems.len(),
                limits.caps.highvalue_edges,
            )?;
            let mut best = (0.0, Vec::new());
            for mask in 0u64..1 << elems.len() {
                if mask % 4096 == 0 {
                    limits.deadline.check()?;
                }
                let set: Vec<usize> = Assortment::from_bits(mask).iter().collect();
                let mut taken = vec![false; partners];
                let mut count = vec![0usize; agents];
                let ok = set.iter().all(|&e| {
                    let (a, b, _) = elems[e];
                    count[a] += 1;
                    !std::mem::replace(&mut taken[b], true)
                        && budget[a].is_none_or(|k| count[a] <= k)
                });
                if ok {
                    let val = objective(&set);
                    if val > best.0 + 1e-12 {
                        best = (val, set);
                    }
                }
            }
            best.1
        }
    };
    let mut rows = vec![Assortment::EMPTY; inst.n()];
    for &e in &chosen {
        let (i, j) = list[e];
        rows[i] = rows[i].with(j);
    }
    Ok(HighValueSolution {
        value: objective(&chosen),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LowLow,
    HighW,
    HighV,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FsSolution {
    /// Selected edges as customer rows; displayed mutually.
    pub rows: EdgeRows,
    pub value: f64,
    pub regime: Regime,
}

impl FsSolution {
    pub fn displays(&self, m: usize) -> (Vec<Assortment>, Vec<Assortment>) {
        mutual_displays(&self.rows, m)
    }
}

pub fn mutual_value(inst: &Instance, rows: &[Assortment]) -> Result<f64> {
    let (c, s) = mutual_displays(rows, inst.m());
    exact_value_static(inst, &c, &s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxReport {
    pub solution: FsSolution,
    /// Realized exact values of the high-w, high-v and low-low candidates.
    pub regime_values: [f64; 3],
    /// Mean exact value over the rounding trials.
    pub lowlow_mean: f64,
    pub z_lp: f64,
    pub mode: SubproblemMode,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ApproxOptions {
    pub alpha: f64,
    pub trials: usize,
    pub mode: SubproblemMode,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            alpha: ALPHA,
            trials: 16,
            mode: SubproblemMode::Greedy,
        }
    }
}

/// The three-regime fully static algorithm for MNL markets.
pub fn approx_fully_static(
    inst: &Instance,
    opts: ApproxOptions,
    rng: &mut TsaRng,
    limits: &Limits,
) -> Result<ApproxReport> {
    let (v, w) = inst.mnl_matrices()?;
    let part = edge_partition(&v, &w, opts.alpha);
    let constrained = inst.is_constrained();
    let hw = highvalue_subproblem(
        inst,
        &part.e1,
        Side::Customers,
        constrained,
        opts.mode,
        limits,
    )?;
    let hv = highvalue_subproblem(
        inst,
        &part.e2,
        Side::Suppliers,
        constrained,
        opts.mode,
        limits,
    )?;
    let ll = lowlow_lp_on(inst, &part.e3, constrained)?;
    let trials = opts.trials.max(1);
    let mut best_ll = (f64::NEG_INFINITY, vec![Assortment::EMPTY; inst.n()]);
    let mut sum = 0.0;
    for _ in 0..trials {
        let rows = if constrained {
            dependent_rounding(&ll.y, &inst.k_customer, &inst.k_supplier, rng)?
        } else {
            independent_rounding(&ll.y, rng)
        };
        let val = mutual_value(inst, &rows)?;
        sum += val;
        if val > best_ll.0 {
            best_ll = (val, rows);
        }
    }
    let cands = [
        (mutual_value(inst, &hw.rows)?, hw.rows, Regime::HighW),
        (mutual_value(inst, &hv.rows)?, hv.rows, Regime::HighV),
        (best_ll.0, best_ll.1, Regime::LowLow),
    ];
    let regime_values = [cands[0].0, cands[1].0, cands[2].0];
    let (value, rows, regime) = cands
        .into_iter()
        .fold(None, |acc: Option<(f64, EdgeRows, Regime)>, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        })
        .unwrap();
    Ok(ApproxReport {
        solution: FsSolution {
            rows,
            value,
            regime,
        },
        regime_values,
        lowlow_mean: sum / trials as f64,
        z_lp: ll.z_lp,
        mode: opts.mode,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearResult {
    pub solution: FsSolution,
    /// Best bilinear objective reached; a lower bound on OPT_FS.
    pub z_b: f64,
    /// Objective after each half-step of the start that produced `z_b`.
    pub history: Vec<f64>,
}

/// max Σ c_ij t_ij s.t. t_ij + u_ij Σ_{same agent} t ≤ u_ij; `group` maps an edge to its agent.
fn side_lp(c: &[f64], u: &[f64], group: &[usize], groups: usize) -> Result<Vec<f64>> {
    let k = c.len();
    let mut p = LpProblem::new(k);
    p.objective.copy_from_slice(c);
    let members: Vec<Vec<usize>> = (0..groups)
        .map(|g| (0..k).filter(|&e| group[e] == g).collect())
        .collect();
    for e in 0..k {
        let mut row: Vec<(usize, f64)> = members[group[e]].iter().map(|&f| (f, u[e])).collect();
        row.iter_mut().find(|r| r.0 == e).unwrap().1 += 1.0;
        p.le(row, u[e]);
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "bilinear side LP ended {:?}",
            sol.status
        )));
    }
    Ok(sol.x)
}

/// Alternating maximization of the disjoint bilinear reformulation of the fully static problem.
pub fn bilinear_alternation(
    inst: &Instance,
    starts: usize,
    rng: &mut TsaRng,
) -> Result<BilinearResult> {
    if inst.is_constrained() {
        return Err(Error::Invalid(
            "the bilinear reformulation covers unconstrained instances".into(),
        ));
    }
    let (v, w) = inst.mnl_matrices()?;
    let (n, m) = (inst.n(), inst.m());
    let k = n * m;
    let vu: Vec<f64> = (0..k).map(|e| v[e / m][e % m]).collect();
    let wu: Vec<f64> = (0..k).map(|e| w[e % m][e / m]).collect();
    let by_customer: Vec<usize> = (0..k).map(|e| e / m).collect();
    let by_supplier: Vec<usize> = (0..k).map(|e| e % m).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut best: Option<BilinearResult> = None;
    for s in 0..starts.max(1) {
        // supplier displays: everyone on the first start, random halves afterwards
        let disp: Vec<Assortment> = (0..m)
            .map(|_| {
                if s == 0 {
                    Assortment::full(n)
                } else {
                    Assortment::from_indices((0..n).filter(|_| rng.gen::<bool>()))
                }
            })
            .collect();
        let mut z: Vec<f64> = (0..k)
            .map(|e| {
                let (i, j) = (e / m, e % m);
                if disp[j].contains(i) {
                    w[j][i] / (1.0 + disp[j].iter().map(|l| w[j][l]).sum::<f64>())
                } else {
                    0.0
                }
            })
            .collect();
        let mut y = vec![0.0; k];
        let mut obj = f64::NEG_INFINITY;
        let mut history = Vec::new();
        for _ in 0..200 {
            y = side_lp(&z, &vu, &by_customer, n)?;
            history.push(dot(&y, &z));
            z = side_lp(&y, &wu, &by_supplier, m)?;
            let next = dot(&y, &z);
            history.push(next);
            if next <= obj + 1e-8 {
                obj = obj.max(next);
                break;
            }
            obj = next;
        }
        let rows: EdgeRows = (0..n)
            .map(|i| {
                Assortment::from_indices(
                    (0..m).filter(|&j| y[i * m + j] > 1e-9 && z[i * m + j] > 1e-9),
                )
            })
            .collect();
        let value = mutual_value(inst, &rows)?;
        let cand = BilinearResult {
            solution: FsSolution {
                rows,
                value,
                regime: Regime::Combined,
            },
            z_b: obj,
            history,
        };
        if best
            .as_ref()
            .is_none_or(|b| cand.solution.value > b.solution.value + 1e-12)
        {
            let z_b = best.as_ref().map_or(obj, |b| b.z_b.max(obj));
            best = Some(BilinearResult { z_b, ..cand });
        } else if let Some(b) = best.as_mut() {
            b.z_b = b.z_b.max(obj);
        }
    }
    Ok(best.expect("at least one start"))
}
