use crate::assortment::Assortment;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::generate::rng_from_seed;
use crate::instance::{Instance, Side};
use crate::limits::Limits;
use crate::oracle::{best_weighted_assortment, constrained_demand, ENUM_LIMIT};
use crate::policy::{
    exact_value_deterministic_adaptive_with, exact_value_one_sided_static_with, monte_carlo_with,
    next_responder, run_rng, simulate_once, Agent, Policy, PolicyAction, PolicyClass, PolicyState,
    SimulationResult,
};
use rand::Rng;
use serde::Serialize;

/// Arbitrary Order Greedy for the initiating `side`.
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    pub side: Side,
    pub order: Vec<usize>,
}

pub fn greedy_one_sided(
    inst: &Instance,
    side: Side,
    order: Option<Vec<usize>>,
) -> Result<GreedyPolicy> {
    let k = inst.size(side);
    let order = order.unwrap_or_else(|| (0..k).collect());
    let mut seen = vec![false; k];
    for &i in &order {
        if i >= k || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Invalid(format!(
                "order {order:?} is not a permutation of 0..{k}"
            )));
        }
    }
    if order.len() != k {
        return Err(Error::Invalid(format!(
            "order {order:?} is not a permutation of 0..{k}"
        )));
    }
    Ok(GreedyPolicy { side, order })
}

impl GreedyPolicy {
    /// θ_j = f^K_j(B_j ∪ {i}) − f^K_j(B_j) over responders j.
    pub fn marginals(&self, inst: &Instance, state: &PolicyState, i: usize) -> Result<Vec<f64>> {
        let resp = self.side.opposite();
        (0..inst.size(resp))
            .map(|j| {
                let model = &inst.models(resp)[j];
                let k = inst.budgets(resp)[j];
                let b = state.backlog(Agent {
                    side: resp,
                    index: j,
                });
                let with = constrained_demand(model, b.with(i), k)?.value;
                let without = if b.is_empty() {
                    0.0
                } else {
                    constrained_demand(model, b, k)?.value
                };
                Ok((with - without).max(0.0))
            })
            .collect()
    }
}

impl Policy for GreedyPolicy {
    fn class(&self) -> PolicyClass {
        match self.side {
            Side::Customers => PolicyClass::COA,
            Side::Suppliers => PolicyClass::SOA,
        }
    }

    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>> {
        let done = state.processed(self.side);
        if let Some(&i) = self.order.iter().find(|&&i| !done.contains(i)) {
            let theta = self.marginals(inst, state, i)?;
            let agent = Agent {
                side: self.side,
                index: i,
            };
            let pick = best_weighted_assortment(
                &inst.models(self.side)[i],
                &theta,
                inst.budgets(self.side)[i],
            )?;
            return Ok(Some(PolicyAction {
                agent,
                assortment: pick.assortment,
            }));
        }
        next_responder(inst, self.side, state)
    }
}

/// Initiating choices averaged exactly at the end of each conditional Monte Carlo run.
pub const CONDITIONAL_TAIL: usize = 2;

impl GreedyPolicy {
    /// Σ_j f^K_j(B_j): expected matches once the initiating side is done, since every responder
    /// is shown the best part of its backlog and all of it picked that responder.
    pub fn responder_value(&self, inst: &Instance, state: &PolicyState) -> Result<f64> {
        let resp = self.side.opposite();
        (0..inst.size(resp))
            .map(|j| {
                let b = state.backlog(Agent {
                    side: resp,
                    index: j,
                });
                if b.is_empty() {
                    Ok(0.0)
                } else {
                    Ok(constrained_demand(&inst.models(resp)[j], b, inst.budgets(resp)[j])?.value)
                }
            })
            .sum()
    }

    /// Expected `responder_value` when the next `depth` initiating choices are averaged exactly.
    fn tail_value(&self, inst: &Instance, state: &PolicyState, depth: usize) -> Result<f64> {
        let act = match self.next_action(inst, state)? {
            Some(a) if depth > 0 && a.agent.side == self.side => a,
            _ => return self.responder_value(inst, state),
        };
        let probs = inst.models(self.side)[act.agent.index].probs(act.assortment)?;
        let mut outside = state.clone();
        outside.record(act.agent, None);
        let mut total = (1.0 - probs.iter().sum::<f64>()).max(0.0)
            * self.tail_value(inst, &outside, depth - 1)?;
        for j in act.assortment.iter().filter(|&j| probs[j] > 0.0) {
            let mut next = state.clone();
            next.record(act.agent, Some(j));
            total += probs[j] * self.tail_value(inst, &next, depth - 1)?;
        }
        Ok(total)
    }

    /// Monte Carlo over the initiating side only: choices are sampled except the last
    /// `CONDITIONAL_TAIL`, which are averaged exactly, and each run is scored by
    /// `responder_value`. Unbiased for the policy value with less variance than counting matches.
    pub fn conditional_monte_carlo(
        &self,
        inst: &Instance,
        runs: usize,
        seed: u64,
        exec: Exec,
    ) -> Result<SimulationResult> {
        if runs == 0 {
            return Err(Error::Invalid("monte carlo needs at least one run".into()));
        }
        let sampled = self.order.len().saturating_sub(CONDITIONAL_TAIL);
        let samples = exec
            .map(runs, |r| {
                let mut rng = run_rng(seed, r);
                let mut state = PolicyState::new(inst);
                for _ in 0..sampled {
                    let act = self
                        .next_action(inst, &state)?
                        .expect("initiating agents remain");
                    let choice = inst.models(self.side)[act.agent.index]
                        .sample(act.assortment, rng.gen::<f64>())?;
                    state.record(act.agent, choice);
                }
                self.tail_value(inst, &state, CONDITIONAL_TAIL)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        Ok(SimulationResult::from_samples(&samples, seed))
    }
}

/// Smallest positive max_S φ_a(b, S) over all agents a and options b; `None` when none is positive.
pub fn phi_min(inst: &Instance) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for model in inst.customers.iter().chain(&inst.suppliers) {
        let u = model.universe();
        let mut top = vec![0.0f64; u];
        if let Some(v) = model.mnl_weights() {
            for (t, w) in top.iter_mut().zip(v) {
                *t = w / (1.0 + w);
            }
        } else if u <= ENUM_LIMIT {
            let mut buf = vec![0.0; u];
            for s in Assortment::full(u).subsets() {
                match model.probs_into(s, &mut buf) {
                    Ok(()) => top.iter_mut().zip(&buf).for_each(|(t, p)| *t = t.max(*p)),
                    Err(Error::Domain(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        } else {
            for (j, t) in top.iter_mut().enumerate() {
                *t = model.prob(j, Assortment::singleton(j))?;
            }
        }
        for p in top.into_iter().filter(|p| *p > 0.0) {
            best = Some(best.map_or(p, |b| b.min(p)));
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplingConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Fixed run count; results are then labeled heuristic-T.
    pub runs_override: Option<usize>,
    /// Derived counts above this fall back to the heuristic count.
    pub max_runs: usize,
}

pub const HEURISTIC_RUNS: usize = 100;

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            epsilon: 0.1,
            delta: 0.05,
            runs_override: None,
            max_runs: 100_000,
        }
    }
}

/// T = ceil(3 / (ε² φ_min) · ln(2/δ)).
pub fn sample_count(cfg: &SamplingConfig, phi_min: f64) -> Result<usize> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0 + 1e-12) || !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::Invalid("epsilon and delta must lie in (0,1)".into()));
    }
    if phi_min <= 0.0 || !phi_min.is_finite() {
        return Err(Error::Invalid(
            "phi_min must be positive without a runs override".into(),
        ));
    }
    let t = 3.0 / (cfg.epsilon * cfg.epsilon * phi_min) * (2.0 / cfg.delta).ln();
    Ok(((t - 1e-9).ceil() as usize).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunsLabel {
    Derived,
    HeuristicT,
}

/// Number of estimation runs per side and whether it came from the sample-size bound.
pub fn resolve_runs(inst: &Instance, cfg: &SamplingConfig) -> Result<(usize, RunsLabel)> {
    if let Some(r) = cfg.runs_override {
        return Ok((r.max(1), RunsLabel::HeuristicT));
    }
    match phi_min(inst)? {
        Some(p) => {
            let t = sample_count(cfg, p)?;
            if t <= cfg.max_runs {
                Ok((t, RunsLabel::Derived))
            } else {
                Ok((HEURISTIC_RUNS, RunsLabel::HeuristicT))
            }
        }
        None => Ok((HEURISTIC_RUNS, RunsLabel::HeuristicT)),
    }
}

/// XORed into the seed for supplier-side estimates.
pub const SUPPLIER_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Greedy on the side whose simulated estimate is higher.
#[derive(Clone, Debug)]
pub struct SamplingPolicy {
    pub side: Side,
    pub estimate_customers: SimulationResult,
    pub estimate_suppliers: SimulationResult,
    pub runs: usize,
    pub label: RunsLabel,
    pub greedy: GreedyPolicy,
}

impl Policy for SamplingPolicy {
    fn class(&self) -> PolicyClass {
        self.greedy.class()
    }

    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>> {
        self.greedy.next_action(inst, state)
    }
}

pub fn sampling_side_selector(
    inst: &Instance,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<SamplingPolicy> {
    sampling_side_selector_with(inst, cfg, seed, Exec::default_mode())
}

pub fn sampling_side_selector_with(
    inst: &Instance,
    cfg: &SamplingConfig,
    seed: u64,
    exec: Exec,
) -> Result<SamplingPolicy> {
    let (runs, label) = resolve_runs(inst, cfg)?;
    let gc = greedy_one_sided(inst, Side::Customers, None)?;
    let gs = greedy_one_sided(inst, Side::Suppliers, None)?;
    let ec = monte_carlo_with(inst, &gc, runs, seed, exec)?;
    let es = monte_carlo_with(inst, &gs, runs, seed ^ SUPPLIER_STREAM_SALT, exec)?;
    let (side, greedy) = if es.mean > ec.mean {
        (Side::Suppliers, gs)
    } else {
        (Side::Customers, gc)
    };
    Ok(SamplingPolicy {
        side,
        estimate_customers: ec,
        estimate_suppliers: es,
        runs,
        label,
        greedy,
    })
}

/// Greedy on a side picked by a fair coin.
#[derive(Clone, Debug)]
pub struct CoinTossPolicy {
    pub coin: Side,
    pub customers: GreedyPolicy,
    pub suppliers: GreedyPolicy,
}

impl CoinTossPolicy {
    pub fn chosen(&self) -> &GreedyPolicy {
        match self.coin {
            Side::Customers => &self.customers,
            Side::Suppliers => &self.suppliers,
        }
    }

    /// Expectation over the coin: (E[M_C] + E[M_S]) / 2.
    pub fn exact_value(&self, inst: &Instance, limits: &Limits) -> Result<f64> {
        Ok(0.5
            * (exact_value_deterministic_adaptive_with(inst, &self.customers, limits)?
                + exact_value_deterministic_adaptive_with(inst, &self.suppliers, limits)?))
    }
}

impl Policy for CoinTossPolicy {
    fn class(&self) -> PolicyClass {
        self.chosen().class()
    }

    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>> {
        self.chosen().next_action(inst, state)
    }
}

pub fn cointoss_fully_adaptive(inst: &Instance, seed: u64) -> Result<CoinTossPolicy> {
    let coin = if rng_from_seed(seed).gen::<bool>() {
        Side::Suppliers
    } else {
        Side::Customers
    };
    Ok(CoinTossPolicy {
        coin,
        customers: greedy_one_sided(inst, Side::Customers, None)?,
        suppliers: greedy_one_sided(inst, Side::Suppliers, None)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticGreedy {
    pub value: f64,
    pub side: Side,
    pub sets: Vec<Assortment>,
}

/// Simulates greedy `runs` times per side and keeps the initiating-side assortments whose
/// exact one-sided static value is best.
pub fn greedy_one_sided_static(
    inst: &Instance,
    runs: usize,
    seed: u64,
    limits: &Limits,
) -> Result<StaticGreedy> {
    let mut best: Option<StaticGreedy> = None;
    for (s, side) in [Side::Customers, Side::Suppliers].into_iter().enumerate() {
        let g = greedy_one_sided(inst, side, None)?;
        for r in 0..runs.max(1) {
            let (_, trace) = simulate_once(inst, &g, &mut run_rng(seed.wrapping_add(s as u64), r))?;
            let mut sets = vec![Assortment::EMPTY; inst.size(side)];
            for rec in trace.iter().filter(|t| t.agent.side == side) {
                sets[rec.agent.index] = rec.assortment;
            }
            let value = exact_value_one_sided_static_with(inst, side, &sets, limits)?;
            if best.as_ref().is_none_or(|b| value > b.value + 1e-12) {
                best = Some(StaticGreedy { value, side, sets });
            }
        }
    }
    Ok(best.expect("at least one run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{tight_instance, TightKind};
    use crate::policy::exact_value_deterministic_adaptive;

    fn unit() -> Instance {
        Instance::mnl(vec![vec![1.0]], vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn unit_pair_greedy() {
        let inst = unit();
        let g = greedy_one_sided(&inst, Side::Customers, None).unwrap();
        let first = g
            .next_action(&inst, &PolicyState::new(&inst))
            .unwrap()
            .unwrap();
        assert_eq!(first.assortment, Assortment::singleton(0));
        assert!((exact_value_deterministic_adaptive(&inst, &g).unwrap() - 0.25).abs() < 1e-12);
        let c = cointoss_fully_adaptive(&inst, 0).unwrap();
        assert!((c.exact_value(&inst, &Limits::default()).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn prop1_greedy_from_customers() {
        for n in 2..=4 {
            let inst = tight_instance(TightKind::Prop1, n).unwrap();
            let g = greedy_one_sided(&inst, Side::Customers, None).unwrap();
            let want = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
            assert!((exact_value_deterministic_adaptive(&inst, &g).unwrap() - want).abs() < 1e-12);
        }
        let inst = tight_instance(TightKind::Prop1, 2).unwrap();
        let c = cointoss_fully_adaptive(&inst, 5).unwrap();
        assert!((c.exact_value(&inst, &Limits::default()).unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn zero_marginals_show_nothing() {
        let inst = Instance::mnl(vec![vec![1.0, 1.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        let g = greedy_one_sided(&inst, Side::Customers, None).unwrap();
        let first = g
            .next_action(&inst, &PolicyState::new(&inst))
            .unwrap()
            .unwrap();
        assert_eq!(first.assortment, Assortment::EMPTY);
        assert_eq!(exact_value_deterministic_adaptive(&inst, &g).unwrap(), 0.0);
    }

    #[test]
    fn phi_min_values() {
        assert_eq!(phi_min(&unit()).unwrap(), Some(0.5));
        let inst = Instance::mnl(vec![vec![0.25, 1.0]], vec![vec![3.0], vec![1.0]]).unwrap();
        assert!((phi_min(&inst).unwrap().unwrap() - 0.2).abs() < 1e-12);
        let zero = Instance::mnl(vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        assert_eq!(phi_min(&zero).unwrap(), None);
        let (runs, label) = resolve_runs(&zero, &SamplingConfig::default()).unwrap();
        assert_eq!((runs, label), (HEURISTIC_RUNS, RunsLabel::HeuristicT));
    }

    #[test]
    fn sample_count_values() {
        let cfg = |e: f64, d: f64| SamplingConfig {
            epsilon: e,
            delta: d,
            ..Default::default()
        };
        assert_eq!(
            sample_count(&cfg(1.0, 2.0 / std::f64::consts::E), 1.0).unwrap(),
            3
        );
        assert_eq!(sample_count(&cfg(0.1, 0.05), 0.5).unwrap(), 2214);
        let a = sample_count(&cfg(0.2, 0.05), 0.3).unwrap();
        let b = sample_count(&cfg(0.1, 0.05), 0.3).unwrap();
        assert!((b as f64 / a as f64 - 4.0).abs() < 0.01);
        assert!(sample_count(&cfg(0.1, 0.05), 0.0).is_err());
    }

    #[test]
    fn selector_prefers_customers_on_prop1() {
        let inst = tight_instance(TightKind::Prop1, 2).unwrap();
        let cfg = SamplingConfig {
            runs_override: Some(2000),
            ..Default::default()
        };
        let p = sampling_side_selector(&inst, &cfg, 11).unwrap();
        assert_eq!(p.side, Side::Customers);
        assert_eq!(p.runs, 2000);
        assert_eq!(p.label, RunsLabel::HeuristicT);
    }

    #[test]
    fn coin_is_seeded() {
        let inst = unit();
        let a: Vec<Side> = (0..16)
            .map(|s| cointoss_fully_adaptive(&inst, s).unwrap().coin)
            .collect();
        let b: Vec<Side> = (0..16)
            .map(|s| cointoss_fully_adaptive(&inst, s).unwrap().coin)
            .collect();
        assert_eq!(a, b);
        assert!(a.contains(&Side::Customers) && a.contains(&Side::Suppliers));
    }

    #[test]
    fn bad_order_rejected() {
        let inst = tight_instance(TightKind::Lemma3, 2).unwrap();
        assert!(greedy_one_sided(&inst, Side::Customers, Some(vec![0, 0])).is_err());
        assert!(greedy_one_sided(&inst, Side::Customers, Some(vec![1])).is_err());
    }
}
