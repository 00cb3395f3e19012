use crate::assortment::Assortment;
use crate::error::{cap, Error, Result};
use crate::exec::Exec;
use crate::generate::TsaRng;
use crate::instance::{fits, Instance, Side};
use crate::limits::Limits;
use crate::oracle::constrained_demand;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Agent {
    pub side: Side,
    pub index: usize,
}

impl Agent {
    pub fn customer(index: usize) -> Self {
        Agent {
            side: Side::Customers,
            index,
        }
    }

    pub fn supplier(index: usize) -> Self {
        Agent {
            side: Side::Suppliers,
            index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PolicyClass {
    FS,
    #[serde(rename = "C-OS")]
    COS,
    #[serde(rename = "S-OS")]
    SOS,
    #[serde(rename = "C-OA")]
    COA,
    #[serde(rename = "S-OA")]
    SOA,
    FA,
}

impl PolicyClass {
    /// The side that must be fully processed first, if any.
    pub fn initiating(self) -> Option<Side> {
        match self {
            PolicyClass::COS | PolicyClass::COA => Some(Side::Customers),
            PolicyClass::SOS | PolicyClass::SOA => Some(Side::Suppliers),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyAction {
    pub agent: Agent,
    pub assortment: Assortment,
}

/// Realized history of one policy run.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolicyState {
    pub processed_customers: Assortment,
    pub processed_suppliers: Assortment,
    /// Choice of each processed customer; `None` is the outside option.
    pub customer_choice: Vec<Option<usize>>,
    pub supplier_choice: Vec<Option<usize>>,
    /// Customers who chose each supplier.
    pub supplier_backlogs: Vec<Assortment>,
    /// Suppliers who chose each customer.
    pub customer_backlogs: Vec<Assortment>,
    pub matches: usize,
}

impl PolicyState {
    pub fn new(inst: &Instance) -> Self {
        PolicyState {
            processed_customers: Assortment::EMPTY,
            processed_suppliers: Assortment::EMPTY,
            customer_choice: vec![None; inst.n()],
            supplier_choice: vec![None; inst.m()],
            supplier_backlogs: vec![Assortment::EMPTY; inst.m()],
            customer_backlogs: vec![Assortment::EMPTY; inst.n()],
            matches: 0,
        }
    }

    pub fn processed(&self, side: Side) -> Assortment {
        match side {
            Side::Customers => self.processed_customers,
            Side::Suppliers => self.processed_suppliers,
        }
    }

    pub fn is_processed(&self, a: Agent) -> bool {
        self.processed(a.side).contains(a.index)
    }

    /// Agents of the opposite side who chose `a`.
    pub fn backlog(&self, a: Agent) -> Assortment {
        match a.side {
            Side::Customers => self.customer_backlogs[a.index],
            Side::Suppliers => self.supplier_backlogs[a.index],
        }
    }

    pub fn choice(&self, a: Agent) -> Option<usize> {
        match a.side {
            Side::Customers => self.customer_choice[a.index],
            Side::Suppliers => self.supplier_choice[a.index],
        }
    }

    /// Records that `a` chose `choice`; returns whether this closed a match.
    pub fn record(&mut self, a: Agent, choice: Option<usize>) -> bool {
        let other_side = a.side.opposite();
        match a.side {
            Side::Customers => {
                self.processed_customers = self.processed_customers.with(a.index);
                self.customer_choice[a.index] = choice;
            }
            Side::Suppliers => {
                self.processed_suppliers = self.processed_suppliers.with(a.index);
                self.supplier_choice[a.index] = choice;
            }
        }
        let Some(b) = choice else { return false };
        let partner = Agent {
            side: other_side,
            index: b,
        };
        match other_side {
            Side::Customers => self.customer_backlogs[b] = self.customer_backlogs[b].with(a.index),
            Side::Suppliers => self.supplier_backlogs[b] = self.supplier_backlogs[b].with(a.index),
        }
        let matched = self.is_processed(partner) && self.choice(partner) == Some(a.index);
        if matched {
            self.matches += 1;
        }
        matched
    }

    fn key(&self) -> Vec<u8> {
        fn enc(done: Assortment, ch: &[Option<usize>], out: &mut Vec<u8>) {
            out.extend(
                ch.iter()
                    .enumerate()
                    .map(|(i, c)| match (done.contains(i), c) {
                        (false, _) => 0u8,
                        (true, None) => 1,
                        (true, Some(k)) => 2 + *k as u8,
                    }),
            );
        }
        let mut out = Vec::with_capacity(self.customer_choice.len() + self.supplier_choice.len());
        enc(self.processed_customers, &self.customer_choice, &mut out);
        enc(self.processed_suppliers, &self.supplier_choice, &mut out);
        out
    }
}

/// A deterministic map from states to actions. `None` ends the run.
pub trait Policy: Sync {
    fn class(&self) -> PolicyClass;
    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>>;
}

fn check_action(
    inst: &Instance,
    class: PolicyClass,
    state: &PolicyState,
    act: PolicyAction,
) -> Result<()> {
    let a = act.agent;
    if a.index >= inst.size(a.side) {
        return Err(Error::Contract(format!("agent {a:?} does not exist")));
    }
    if state.is_processed(a) {
        return Err(Error::Contract(format!(
            "agent {a:?} was already processed"
        )));
    }
    if !act
        .assortment
        .is_subset(Assortment::full(inst.size(a.side.opposite())))
    {
        return Err(Error::Contract(format!(
            "assortment {:?} leaves the option universe",
            act.assortment
        )));
    }
    if !fits(act.assortment, inst.budgets(a.side)[a.index]) {
        return Err(Error::Contract(format!(
            "assortment {:?} exceeds the budget of {a:?}",
            act.assortment
        )));
    }
    if let Some(first) = class.initiating() {
        if a.side != first && state.processed(first) != Assortment::full(inst.size(first)) {
            return Err(Error::Contract(format!(
                "{class:?} processed {a:?} before finishing the initiating side"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub agent: Agent,
    pub assortment: Assortment,
    pub choice: Option<usize>,
}

pub type PolicyTrace = Vec<TraceRecord>;

/// JSON lines, one record per action.
pub fn trace_to_jsonl(trace: &PolicyTrace) -> String {
    trace
        .iter()
        .map(|r| serde_json::to_string(r).expect("trace record serializes") + "\n")
        .collect()
}

fn run_policy(
    inst: &Instance,
    policy: &dyn Policy,
    rng: &mut TsaRng,
    mut trace: Option<&mut PolicyTrace>,
) -> Result<usize> {
    let mut state = PolicyState::new(inst);
    let class = policy.class();
    let mut step = 0;
    while let Some(act) = policy.next_action(inst, &state)? {
        check_action(inst, class, &state, act)?;
        let model = &inst.models(act.agent.side)[act.agent.index];
        let choice = model.sample(act.assortment, rng.gen::<f64>())?;
        state.record(act.agent, choice);
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRecord {
                step,
                agent: act.agent,
                assortment: act.assortment,
                choice,
            });
        }
        step += 1;
    }
    Ok(state.matches)
}

pub fn simulate_once(
    inst: &Instance,
    policy: &dyn Policy,
    rng: &mut TsaRng,
) -> Result<(usize, PolicyTrace)> {
    let mut trace = Vec::new();
    let matches = run_policy(inst, policy, rng, Some(&mut trace))?;
    Ok((matches, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub half_width: f64,
    pub runs: usize,
    pub seed: u64,
}

impl SimulationResult {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let t = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / t;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        SimulationResult {
            mean,
            half_width: 1.96 * (var / t).sqrt(),
            runs: samples.len(),
            seed,
        }
    }
}

/// The RNG for run `run` under `seed`: same key, separate stream.
pub fn run_rng(seed: u64, run: usize) -> TsaRng {
    let mut rng = TsaRng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

pub fn monte_carlo(
    inst: &Instance,
    policy: &dyn Policy,
    runs: usize,
    seed: u64,
) -> Result<SimulationResult> {
    monte_carlo_with(inst, policy, runs, seed, Exec::default_mode())
}

pub fn monte_carlo_with(
    inst: &Instance,
    policy: &dyn Policy,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<SimulationResult> {
    if runs == 0 {
        return Err(Error::Invalid("monte carlo needs at least one run".into()));
    }
    let samples = exec
        .map(runs, |r| {
            run_policy(inst, policy, &mut run_rng(seed, r), None).map(|m| m as f64)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimulationResult::from_samples(&samples, seed))
}

/// Σ_{j∈S_i, i∈C_j} φ_i(j,S_i)·φ_j(i,C_j).
pub fn exact_value_static(
    inst: &Instance,
    customer_sets: &[Assortment],
    supplier_sets: &[Assortment],
) -> Result<f64> {
    if customer_sets.len() != inst.n() || supplier_sets.len() != inst.m() {
        return Err(Error::Invalid("one assortment per agent required".into()));
    }
    for (i, s) in customer_sets.iter().enumerate() {
        if !fits(*s, inst.k_customer[i]) {
            return Err(Error::Contract(format!(
                "customer {i} shown {} options over budget",
                s.len()
            )));
        }
    }
    for (j, c) in supplier_sets.iter().enumerate() {
        if !fits(*c, inst.k_supplier[j]) {
            return Err(Error::Contract(format!(
                "supplier {j} shown {} options over budget",
                c.len()
            )));
        }
    }
    let pc: Vec<Vec<f64>> = inst
        .customers
        .iter()
        .zip(customer_sets)
        .map(|(c, s)| c.probs(*s))
        .collect::<Result<_>>()?;
    let ps: Vec<Vec<f64>> = inst
        .suppliers
        .iter()
        .zip(supplier_sets)
        .map(|(c, s)| c.probs(*s))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for i in 0..inst.n() {
        for j in customer_sets[i].iter() {
            if supplier_sets[j].contains(i) {
                total += pc[i][j] * ps[j][i];
            }
        }
    }
    Ok(total)
}

/// What a responding agent is shown: its backlog, or the f^K-optimal part of it.
pub fn responder_display(
    inst: &Instance,
    responder: Agent,
    backlog: Assortment,
) -> Result<Assortment> {
    let k = inst.budgets(responder.side)[responder.index];
    match k {
        None => Ok(backlog),
        Some(_) => {
            Ok(
                constrained_demand(&inst.models(responder.side)[responder.index], backlog, k)?
                    .assortment,
            )
        }
    }
}

/// Expected matches when `side` is shown `sets` simultaneously and responders see their backlogs.
pub fn exact_value_one_sided_static(
    inst: &Instance,
    side: Side,
    sets: &[Assortment],
) -> Result<f64> {
    exact_value_one_sided_static_with(inst, side, sets, &Limits::default())
}

pub fn exact_value_one_sided_static_with(
    inst: &Instance,
    side: Side,
    sets: &[Assortment],
    limits: &Limits,
) -> Result<f64> {
    let o = inst.oriented(side);
    let (n, m) = (o.n(), o.m());
    cap(
        "initiating side for one-sided static evaluation",
        n,
        limits.caps.static_eval_side,
    )?;
    if sets.len() != n {
        return Err(Error::Invalid(
            "one assortment per initiating agent required".into(),
        ));
    }
    for (i, s) in sets.iter().enumerate() {
        if !fits(*s, o.k_customer[i]) {
            return Err(Error::Contract(format!(
                "initiating agent {i} shown {} options over budget",
                s.len()
            )));
        }
    }
    let p: Vec<Vec<f64>> = o
        .customers
        .iter()
        .zip(sets)
        .map(|(c, s)| c.probs(*s))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for j in 0..m {
        let pool = Assortment::from_indices((0..n).filter(|&i| p[i][j] > 0.0));
        let model = &o.suppliers[j];
        for c in pool.subsets() {
            let mut pr = 1.0;
            for i in pool.iter() {
                pr *= if c.contains(i) {
                    p[i][j]
                } else {
                    1.0 - p[i][j]
                };
            }
            if pr > 0.0 && !c.is_empty() {
                total += pr * constrained_demand(model, c, o.k_supplier[j])?.value;
            }
        }
        limits.deadline.check()?;
    }
    Ok(total)
}

/// Exact expected matches of a deterministic policy by expanding every choice realization.
pub fn exact_value_deterministic_adaptive(inst: &Instance, policy: &dyn Policy) -> Result<f64> {
    exact_value_deterministic_adaptive_with(inst, policy, &Limits::default())
}

pub fn exact_value_deterministic_adaptive_with(
    inst: &Instance,
    policy: &dyn Policy,
    limits: &Limits,
) -> Result<f64> {
    cap(
        "n + m for exact policy evaluation",
        inst.n() + inst.m(),
        limits.caps.adaptive_eval_agents,
    )?;
    let mut memo = HashMap::new();
    let mut state = PolicyState::new(inst);
    expand(inst, policy, &mut state, &mut memo, limits)
}

fn expand(
    inst: &Instance,
    policy: &dyn Policy,
    state: &mut PolicyState,
    memo: &mut HashMap<Vec<u8>, f64>,
    limits: &Limits,
) -> Result<f64> {
    let key = state.key();
    if let Some(v) = memo.get(&key) {
        return Ok(*v);
    }
    if memo.len().is_multiple_of(4096) {
        limits.deadline.check()?;
    }
    let value = match policy.next_action(inst, state)? {
        None => 0.0,
        Some(act) => {
            check_action(inst, policy.class(), state, act)?;
            let model = &inst.models(act.agent.side)[act.agent.index];
            let probs = model.probs(act.assortment)?;
            let mut outside = 1.0;
            let mut v = 0.0;
            for b in act.assortment.iter() {
                let p = probs[b];
                if p <= 0.0 {
                    continue;
                }
                outside -= p;
                let mut next = state.clone();
                let hit = next.record(act.agent, Some(b));
                v += p * (hit as u8 as f64 + expand(inst, policy, &mut next, memo, limits)?);
            }
            if outside > 1e-15 {
                let mut next = state.clone();
                next.record(act.agent, None);
                v += outside * expand(inst, policy, &mut next, memo, limits)?;
            }
            v
        }
    };
    memo.insert(key, value);
    Ok(value)
}

/// Fixed assortments for everyone, processed customers first in index order.
#[derive(Clone, Debug)]
pub struct StaticPolicy {
    pub customer_sets: Vec<Assortment>,
    pub supplier_sets: Vec<Assortment>,
}

impl Policy for StaticPolicy {
    fn class(&self) -> PolicyClass {
        PolicyClass::FS
    }

    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>> {
        if let Some(i) = (0..inst.n()).find(|&i| !state.processed_customers.contains(i)) {
            return Ok(Some(PolicyAction {
                agent: Agent::customer(i),
                assortment: self.customer_sets[i],
            }));
        }
        Ok((0..inst.m())
            .find(|&j| !state.processed_suppliers.contains(j))
            .map(|j| PolicyAction {
                agent: Agent::supplier(j),
                assortment: self.supplier_sets[j],
            }))
    }
}

/// The initiating side sees fixed assortments; responders then see their backlogs.
#[derive(Clone, Debug)]
pub struct OneSidedStaticPolicy {
    pub side: Side,
    pub sets: Vec<Assortment>,
}

/// Next responder action once the initiating side is done; shared by one-sided policies.
pub fn next_responder(
    inst: &Instance,
    side: Side,
    state: &PolicyState,
) -> Result<Option<PolicyAction>> {
    let resp = side.opposite();
    let Some(j) = (0..inst.size(resp)).find(|&j| !state.processed(resp).contains(j)) else {
        return Ok(None);
    };
    let agent = Agent {
        side: resp,
        index: j,
    };
    Ok(Some(PolicyAction {
        agent,
        assortment: responder_display(inst, agent, state.backlog(agent))?,
    }))
}

impl Policy for OneSidedStaticPolicy {
    fn class(&self) -> PolicyClass {
        match self.side {
            Side::Customers => PolicyClass::COS,
            Side::Suppliers => PolicyClass::SOS,
        }
    }

    fn next_action(&self, inst: &Instance, state: &PolicyState) -> Result<Option<PolicyAction>> {
        let done = state.processed(self.side);
        if let Some(i) = (0..inst.size(self.side)).find(|&i| !done.contains(i)) {
            return Ok(Some(PolicyAction {
                agent: Agent {
                    side: self.side,
                    index: i,
                },
                assortment: self.sets[i],
            }));
        }
        next_responder(inst, self.side, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{tight_instance, TightKind};

    fn unit() -> Instance {
        Instance::mnl(vec![vec![1.0]], vec![vec![1.0]]).unwrap()
    }

    fn show_all(inst: &Instance) -> StaticPolicy {
        StaticPolicy {
            customer_sets: vec![Assortment::full(inst.m()); inst.n()],
            supplier_sets: vec![Assortment::full(inst.n()); inst.m()],
        }
    }

    #[test]
    fn empty_instance_zero() {
        let inst = Instance::empty();
        let p = show_all(&inst);
        let (m, trace) = simulate_once(&inst, &p, &mut run_rng(0, 0)).unwrap();
        assert_eq!((m, trace.len()), (0, 0));
        assert_eq!(exact_value_deterministic_adaptive(&inst, &p).unwrap(), 0.0);
    }

    #[test]
    fn unit_pair_static_and_mc() {
        let inst = unit();
        let one = [Assortment::singleton(0)];
        assert!((exact_value_static(&inst, &one, &one).unwrap() - 0.25).abs() < 1e-12);
        assert!(
            (exact_value_one_sided_static(&inst, Side::Customers, &one).unwrap() - 0.25).abs()
                < 1e-12
        );
        let r = monte_carlo(&inst, &show_all(&inst), 100_000, 3).unwrap();
        assert!((r.mean - 0.25).abs() < 0.01, "{r:?}");
        assert_eq!(r, monte_carlo(&inst, &show_all(&inst), 100_000, 3).unwrap());
    }

    #[test]
    fn deterministic_outcomes_have_zero_width() {
        let inst = tight_instance(TightKind::Lemma3, 2).unwrap();
        // uniform customers with singleton displays always pick; nobody responds
        let p = OneSidedStaticPolicy {
            side: Side::Customers,
            sets: vec![Assortment::singleton(0), Assortment::singleton(1)],
        };
        let inst = Instance::new(
            inst.customers.clone(),
            vec![crate::choice::ChoiceSpec::uniform(2); 2],
        )
        .unwrap();
        let r = monte_carlo(&inst, &p, 50, 1).unwrap();
        assert_eq!((r.mean, r.half_width), (2.0, 0.0));
    }

    #[test]
    fn prop1_static_values() {
        let inst = tight_instance(TightKind::Prop1, 2).unwrap();
        let all = [Assortment::full(1); 2];
        assert!(
            (exact_value_static(&inst, &all, &[Assortment::full(2)]).unwrap() - 0.5).abs() < 1e-12
        );
        assert_eq!(
            exact_value_static(&inst, &[Assortment::EMPTY; 2], &[Assortment::EMPTY]).unwrap(),
            0.0
        );
        for n in 2..=4 {
            let inst = tight_instance(TightKind::Prop1, n).unwrap();
            let v =
                exact_value_one_sided_static(&inst, Side::Customers, &vec![Assortment::full(1); n])
                    .unwrap();
            let want = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
            assert!((v - want).abs() < 1e-12);
            let p = OneSidedStaticPolicy {
                side: Side::Customers,
                sets: vec![Assortment::full(1); n],
            };
            assert!((exact_value_deterministic_adaptive(&inst, &p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn contract_violations() {
        struct Repeat;
        impl Policy for Repeat {
            fn class(&self) -> PolicyClass {
                PolicyClass::FA
            }
            fn next_action(&self, _: &Instance, _: &PolicyState) -> Result<Option<PolicyAction>> {
                Ok(Some(PolicyAction {
                    agent: Agent::customer(0),
                    assortment: Assortment::singleton(0),
                }))
            }
        }
        let inst = unit();
        assert!(matches!(
            simulate_once(&inst, &Repeat, &mut run_rng(0, 0)),
            Err(Error::Contract(_))
        ));
        let tight = unit().with_profile(crate::instance::CardinalityProfile::TwoWay {
            k_customer: 1,
            k_supplier: 1,
        });
        let over = StaticPolicy {
            customer_sets: vec![Assortment::full(2)],
            supplier_sets: vec![Assortment::full(1)],
        };
        let two = Instance::mnl(vec![vec![1.0, 1.0]], vec![vec![1.0], vec![1.0]])
            .unwrap()
            .with_profile(crate::instance::CardinalityProfile::TwoWay {
                k_customer: 1,
                k_supplier: 1,
            });
        assert!(simulate_once(&two, &over, &mut run_rng(0, 0)).is_err());
        assert!(exact_value_static(&tight, &[Assortment::full(1)], &[Assortment::full(1)]).is_ok());
    }

    #[test]
    fn trace_jsonl_lines() {
        let inst = unit();
        let (_, trace) = simulate_once(&inst, &show_all(&inst), &mut run_rng(9, 0)).unwrap();
        let text = trace_to_jsonl(&trace);
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for k in ["step", "agent", "assortment", "choice"] {
            assert!(first.get(k).is_some());
        }
    }
}
