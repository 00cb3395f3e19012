use crate::assortment::Assortment;
use crate::error::{cap, Error, Result};
use crate::instance::{fits, Instance, Side};
use crate::limits::Limits;
use crate::oracle::{best_weighted_assortment, constrained_demand};
use crate::policy::{exact_value_static, Agent, PolicyAction};
use serde::Serialize;
use std::collections::HashMap;

/// How the Bellman inner maximization over assortments is carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpSearch {
    /// Single-agent weighted oracle on the continuation marginals.
    Oracle,
    /// Every budget-feasible assortment.
    Enumerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DpValue {
    pub value: f64,
    pub states_expanded: usize,
    pub optimal_first_action: Option<PolicyAction>,
}

const UNPROCESSED: u8 = 0;
const SETTLED: u8 = 1;

fn pack(st: &[u8], base: u64) -> u64 {
    st.iter().fold(0u64, |k, &s| k * base + s as u64)
}

fn check_key_width(agents: usize, base: u64) -> Result<()> {
    if (base as f64).powi(agents as i32) >= u64::MAX as f64 {
        return Err(Error::SizeCap {
            what: "DP state encoding width",
            got: agents,
            cap: (64.0 / (base as f64).log2()) as usize,
        });
    }
    Ok(())
}

/// Best of Σ_b φ(b,S)·θ_b over budget-feasible S, by oracle or enumeration.
fn inner_max(
    inst: &Instance,
    agent: Agent,
    theta: &[f64],
    search: DpSearch,
) -> Result<(Assortment, f64)> {
    let model = &inst.models(agent.side)[agent.index];
    let k = inst.budgets(agent.side)[agent.index];
    match search {
        DpSearch::Oracle => {
            let r = best_weighted_assortment(model, theta, k)?;
            Ok((r.assortment, r.value))
        }
        DpSearch::Enumerate => {
            let mut best = (Assortment::EMPTY, 0.0);
            for s in Assortment::full(theta.len())
                .subsets()
                .filter(|s| fits(*s, k))
            {
                let p = model.probs(s)?;
                let v: f64 = s.iter().map(|b| p[b] * theta[b]).sum();
                if v > best.1 + 1e-12 {
                    best = (s, v);
                }
            }
            Ok(best)
        }
    }
}

struct FaDp<'a> {
    inst: &'a Instance,
    n: usize,
    base: u64,
    memo: HashMap<u64, f64>,
    search: DpSearch,
    limits: &'a Limits,
}

impl FaDp<'_> {
    fn agent(&self, g: usize) -> Agent {
        if g < self.n {
            Agent::customer(g)
        } else {
            Agent::supplier(g - self.n)
        }
    }

    fn global(&self, side: Side, idx: usize) -> usize {
        match side {
            Side::Customers => idx,
            Side::Suppliers => self.n + idx,
        }
    }

    /// State after processing `g`: its own status is `status`, pointers at it are settled.
    fn after(&self, st: &[u8], g: usize, status: u8) -> Vec<u8> {
        let a = self.agent(g);
        let mut next = st.to_vec();
        let me = 2 + a.index as u8;
        for k in 0..self.inst.size(a.side.opposite()) {
            let h = self.global(a.side.opposite(), k);
            if next[h] == me {
                next[h] = SETTLED;
            }
        }
        next[g] = status;
        next
    }

    /// (V0, θ) for processing agent g in state st.
    fn marginals(&mut self, st: &[u8], g: usize) -> Result<(f64, Vec<f64>)> {
        let a = self.agent(g);
        let opp = a.side.opposite();
        let base_state = self.after(st, g, SETTLED);
        let v0 = self.value(&base_state)?;
        let mut theta = vec![0.0; self.inst.size(opp)];
        for (k, t) in theta.iter_mut().enumerate() {
            let h = self.global(opp, k);
            *t = match st[h] {
                UNPROCESSED => {
                    let mut s = base_state.clone();
                    s[g] = 2 + k as u8;
                    (self.value(&s)? - v0).max(0.0)
                }
                p if p == 2 + a.index as u8 => 1.0,
                _ => 0.0,
            };
        }
        Ok((v0, theta))
    }

    fn best(&mut self, st: &[u8]) -> Result<(f64, Option<PolicyAction>)> {
        let mut best = (0.0, None);
        for g in 0..st.len() {
            if st[g] != UNPROCESSED {
                continue;
            }
            let (v0, theta) = self.marginals(st, g)?;
            let agent = self.agent(g);
            let (s, r) = inner_max(self.inst, agent, &theta, self.search)?;
            if best.1.is_none() || v0 + r > best.0 + 1e-12 {
                best = (
                    v0 + r,
                    Some(PolicyAction {
                        agent,
                        assortment: s,
                    }),
                );
            }
        }
        Ok(best)
    }

    fn value(&mut self, st: &[u8]) -> Result<f64> {
        let key = pack(st, self.base);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        if self.memo.len().is_multiple_of(8192) {
            self.limits.deadline.check()?;
        }
        let v = self.best(st)?.0;
        self.memo.insert(key, v);
        Ok(v)
    }
}

pub fn opt_fully_adaptive(inst: &Instance) -> Result<DpValue> {
    opt_fully_adaptive_with(inst, &Limits::default(), DpSearch::Oracle)
}

/// Exact OPT over fully adaptive policies by memoized Bellman recursion.
pub fn opt_fully_adaptive_with(
    inst: &Instance,
    limits: &Limits,
    search: DpSearch,
) -> Result<DpValue> {
    let total = inst.n() + inst.m();
    cap(
        "n + m for the fully adaptive DP",
        total,
        limits.caps.fa_agents,
    )?;
    let base = 2 + inst.n().max(inst.m()) as u64;
    check_key_width(total, base)?;
    let mut dp = FaDp {
        inst,
        n: inst.n(),
        base,
        memo: HashMap::new(),
        search,
        limits,
    };
    let root = vec![UNPROCESSED; total];
    let (value, first) = dp.best(&root)?;
    Ok(DpValue {
        value,
        states_expanded: dp.memo.len() + 1,
        optimal_first_action: first,
    })
}

struct OaDp<'a> {
    inst: &'a Instance,
    base: u64,
    memo: HashMap<u64, f64>,
    search: DpSearch,
    limits: &'a Limits,
}

impl OaDp<'_> {
    fn terminal(&self, st: &[u8]) -> Result<f64> {
        let mut backlogs = vec![Assortment::EMPTY; self.inst.m()];
        for (i, &s) in st.iter().enumerate() {
            if s >= 2 {
                let j = (s - 2) as usize;
                backlogs[j] = backlogs[j].with(i);
            }
        }
        let mut total = 0.0;
        for (j, b) in backlogs.into_iter().enumerate() {
            if !b.is_empty() {
                total +=
                    constrained_demand(&self.inst.suppliers[j], b, self.inst.k_supplier[j])?.value;
            }
        }
        Ok(total)
    }

    fn marginals(&mut self, st: &[u8], i: usize) -> Result<(f64, Vec<f64>)> {
        let mut s = st.to_vec();
        s[i] = SETTLED;
        let v0 = self.value(&s)?;
        let mut theta = vec![0.0; self.inst.m()];
        for (j, t) in theta.iter_mut().enumerate() {
            s[i] = 2 + j as u8;
            *t = (self.value(&s)? - v0).max(0.0);
        }
        Ok((v0, theta))
    }

    fn best(&mut self, st: &[u8]) -> Result<(f64, Option<PolicyAction>)> {
        if st.iter().all(|&s| s != UNPROCESSED) {
            return Ok((self.terminal(st)?, None));
        }
        let mut best = (0.0, None);
        for i in 0..st.len() {
            if st[i] != UNPROCESSED {
                continue;
            }
            let (v0, theta) = self.marginals(st, i)?;
            let agent = Agent::customer(i);
            let (s, r) = inner_max(self.inst, agent, &theta, self.search)?;
            if best.1.is_none() || v0 + r > best.0 + 1e-12 {
                best = (
                    v0 + r,
                    Some(PolicyAction {
                        agent,
                        assortment: s,
                    }),
                );
            }
        }
        Ok(best)
    }

    fn value(&mut self, st: &[u8]) -> Result<f64> {
        let key = pack(st, self.base);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        if self.memo.len().is_multiple_of(8192) {
            self.limits.deadline.check()?;
        }
        let v = self.best(st)?.0;
        self.memo.insert(key, v);
        Ok(v)
    }
}

pub fn opt_one_sided_adaptive(inst: &Instance, side: Side) -> Result<DpValue> {
    opt_one_sided_adaptive_with(inst, side, &Limits::default(), DpSearch::Oracle)
}

/// Exact OPT of the one-sided adaptive class initiated by `side`.
pub fn opt_one_sided_adaptive_with(
    inst: &Instance,
    side: Side,
    limits: &Limits,
    search: DpSearch,
) -> Result<DpValue> {
    let o = inst.oriented(side);
    cap(
        "initiating side for the one-sided adaptive DP",
        o.n(),
        limits.caps.oa_side,
    )?;
    let base = 2 + o.m() as u64;
    check_key_width(o.n(), base)?;
    let mut dp = OaDp {
        inst: &o,
        base,
        memo: HashMap::new(),
        search,
        limits,
    };
    let (value, first) = dp.best(&vec![UNPROCESSED; o.n()])?;
    let first = first.map(|a| PolicyAction {
        agent: Agent {
            side,
            index: a.agent.index,
        },
        ..a
    });
    Ok(DpValue {
        value,
        states_expanded: dp.memo.len() + 1,
        optimal_first_action: first,
    })
}

/// OPT_OA = max over both initiating sides.
pub fn opt_oa(inst: &Instance, limits: &Limits) -> Result<f64> {
    let c = opt_one_sided_adaptive_with(inst, Side::Customers, limits, DpSearch::Oracle)?.value;
    let s = opt_one_sided_adaptive_with(inst, Side::Suppliers, limits, DpSearch::Oracle)?.value;
    Ok(c.max(s))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticOptimum {
    pub value: f64,
    /// For one-sided static: the initiating side's assortments. For fully static: each customer's
    /// selected suppliers (displayed mutually).
    pub sets: Vec<Assortment>,
}

pub fn opt_one_sided_static(inst: &Instance, side: Side) -> Result<StaticOptimum> {
    opt_one_sided_static_with(inst, side, &Limits::default())
}

/// Exhaustive search over assortment families of the initiating side.
pub fn opt_one_sided_static_with(
    inst: &Instance,
    side: Side,
    limits: &Limits,
) -> Result<StaticOptimum> {
    cap(
        "max(n, m) for the one-sided static optimum",
        inst.n().max(inst.m()),
        limits.caps.os_side,
    )?;
    let o = inst.oriented(side);
    let (n, m) = (o.n(), o.m());
    // f^K_j on every customer subset
    let fk: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            Assortment::full(n)
                .subsets()
                .map(|c| constrained_demand(&o.suppliers[j], c, o.k_supplier[j]).map(|r| r.value))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    // feasible assortments and choice probabilities per customer
    let options: Vec<Vec<(Assortment, Vec<f64>)>> = (0..n)
        .map(|i| {
            Assortment::full(m)
                .subsets()
                .filter(|s| fits(*s, o.k_customer[i]))
                .map(|s| o.customers[i].probs(s).map(|p| (s, p)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut idx = vec![0usize; n];
    let mut best = StaticOptimum {
        value: -1.0,
        sets: vec![Assortment::EMPTY; n],
    };
    let mut count = 0usize;
    loop {
        let mut total = 0.0;
        for (j, fkj) in fk.iter().enumerate() {
            for (c_pos, c) in Assortment::full(n).subsets().enumerate() {
                if c.is_empty() {
                    continue;
                }
                let mut pr = 1.0;
                for (i, opts) in options.iter().enumerate() {
                    let p = opts[idx[i]].1[j];
                    pr *= if c.contains(i) { p } else { 1.0 - p };
                    if pr == 0.0 {
                        break;
                    }
                }
                total += pr * fkj[c_pos];
            }
        }
        if total > best.value + 1e-12 {
            best = StaticOptimum {
                value: total,
                sets: (0..n).map(|i| options[i][idx[i]].0).collect(),
            };
        }
        count += 1;
        if count.is_multiple_of(1024) {
            limits.deadline.check()?;
        }
        // odometer
        let mut pos = 0;
        while pos < n {
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    best.value = best.value.max(0.0);
    Ok(best)
}

/// OPT_OS = max over both initiating sides.
pub fn opt_os(inst: &Instance, limits: &Limits) -> Result<f64> {
    Ok(opt_one_sided_static_with(inst, Side::Customers, limits)?
        .value
        .max(opt_one_sided_static_with(inst, Side::Suppliers, limits)?.value))
}

/// Customer and supplier displays induced by a mutual edge set given as customer rows.
pub fn mutual_displays(rows: &[Assortment], m: usize) -> (Vec<Assortment>, Vec<Assortment>) {
    let mut cols = vec![Assortment::EMPTY; m];
    for (i, r) in rows.iter().enumerate() {
        for j in r.iter() {
            cols[j] = cols[j].with(i);
        }
    }
    (rows.to_vec(), cols)
}

pub fn opt_fully_static(inst: &Instance) -> Result<StaticOptimum> {
    opt_fully_static_with(inst, &Limits::default())
}

/// Exhaustive search over mutually displayed edge sets.
pub fn opt_fully_static_with(inst: &Instance, limits: &Limits) -> Result<StaticOptimum> {
    let (n, m) = (inst.n(), inst.m());
    cap(
        "n * m for the fully static brute force",
        n * m,
        limits.caps.fs_edges,
    )?;
    let edges = n * m;
    let mut best = StaticOptimum {
        value: 0.0,
        sets: vec![Assortment::EMPTY; n],
    };
    let mnl = inst.mnl_matrices().ok();
    let mut rows = vec![Assortment::EMPTY; n];
    let mut cols = vec![Assortment::EMPTY; m];
    for mask in 0u64..1 << edges {
        if mask % 4096 == 0 {
            limits.deadline.check()?;
        }
        rows.fill(Assortment::EMPTY);
        cols.fill(Assortment::EMPTY);
        for e in Assortment::from_bits(mask).iter() {
            let (i, j) = (e / m, e % m);
            rows[i] = rows[i].with(j);
            cols[j] = cols[j].with(i);
        }
        if rows
            .iter()
            .zip(&inst.k_customer)
            .any(|(r, k)| !fits(*r, *k))
            || cols
                .iter()
                .zip(&inst.k_supplier)
                .any(|(c, k)| !fits(*c, *k))
        {
            continue;
        }
        let value = match &mnl {
            Some((v, w)) => {
                let dc: Vec<f64> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| 1.0 + r.iter().map(|j| v[i][j]).sum::<f64>())
                    .collect();
                let ds: Vec<f64> = cols
                    .iter()
                    .enumerate()
                    .map(|(j, c)| 1.0 + c.iter().map(|i| w[j][i]).sum::<f64>())
                    .collect();
                let mut t = 0.0;
                for (i, r) in rows.iter().enumerate() {
                    for j in r.iter() {
                        t += v[i][j] / dc[i] * w[j][i] / ds[j];
                    }
                }
                t
            }
            None => exact_value_static(inst, &rows, &cols)?,
        };
        if value > best.value + 1e-12 {
            best = StaticOptimum {
                value,
                sets: rows.clone(),
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{tight_instance, TightKind};

    fn unit() -> Instance {
        Instance::mnl(vec![vec![1.0]], vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn unit_pair_all_classes() {
        let inst = unit();
        assert!((opt_fully_adaptive(&inst).unwrap().value - 0.25).abs() < 1e-12);
        for side in [Side::Customers, Side::Suppliers] {
            assert!((opt_one_sided_adaptive(&inst, side).unwrap().value - 0.25).abs() < 1e-12);
            assert!((opt_one_sided_static(&inst, side).unwrap().value - 0.25).abs() < 1e-12);
        }
        assert!((opt_fully_static(&inst).unwrap().value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_instance() {
        let inst = Instance::empty();
        assert_eq!(opt_fully_adaptive(&inst).unwrap().value, 0.0);
        assert_eq!(opt_fully_static(&inst).unwrap().value, 0.0);
    }

    #[test]
    fn zero_weights() {
        let inst = Instance::mnl(vec![vec![0.0; 2]; 2], vec![vec![0.0; 2]; 2]).unwrap();
        assert_eq!(opt_fully_static(&inst).unwrap().value, 0.0);
        assert_eq!(opt_fully_adaptive(&inst).unwrap().value, 0.0);
    }

    #[test]
    fn prop1_values() {
        for n in 2..=4 {
            let inst = tight_instance(TightKind::Prop1, n).unwrap();
            let nf = n as f64;
            let c_side = 1.0 - (1.0 - 1.0 / nf).powi(n as i32);
            assert!((opt_fully_static(&inst).unwrap().value - 1.0 / nf).abs() < 1e-12);
            assert!(
                (opt_one_sided_static(&inst, Side::Customers).unwrap().value - c_side).abs()
                    < 1e-12
            );
            assert!(
                (opt_one_sided_static(&inst, Side::Suppliers).unwrap().value - 1.0 / nf).abs()
                    < 1e-12
            );
            assert!(
                (opt_one_sided_adaptive(&inst, Side::Customers)
                    .unwrap()
                    .value
                    - c_side)
                    .abs()
                    < 1e-12
            );
            assert!(
                (opt_one_sided_adaptive(&inst, Side::Suppliers)
                    .unwrap()
                    .value
                    - 1.0 / nf)
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn lemma6_fa() {
        let inst = tight_instance(TightKind::Lemma6, 3).unwrap();
        let r = opt_fully_adaptive(&inst).unwrap();
        assert!((r.value - 10.0 / 9.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn lemma3_os_and_oa() {
        let inst = tight_instance(TightKind::Lemma3, 2).unwrap();
        let os = opt_os(&inst, &Limits::default()).unwrap();
        assert!((os - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-9, "{os}");
        let b = crate::choice::beta_k(1) + crate::choice::beta_k(2);
        assert!(opt_oa(&inst, &Limits::default()).unwrap() >= b - 1e-9);
    }

    #[test]
    fn size_caps() {
        let inst = tight_instance(TightKind::Thm3, 3).unwrap();
        assert!(matches!(
            opt_fully_adaptive(&inst),
            Err(Error::SizeCap { .. })
        ));
        assert!(matches!(
            opt_fully_static(&inst),
            Err(Error::SizeCap { .. })
        ));
    }
}
