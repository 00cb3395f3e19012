use crate::assortment::Assortment;
use crate::choice::ChoiceSpec;
use crate::error::{Error, Result};
use crate::generate::rng_from_seed;
use crate::instance::Budget;
use rand::Rng;
use serde::Serialize;
use std::cmp::Ordering;

/// Largest option universe a non-MNL model is enumerated over.
pub const ENUM_LIMIT: usize = 20;
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub assortment: Assortment,
    pub value: f64,
}

impl OracleResult {
    const NONE: OracleResult = OracleResult {
        assortment: Assortment::EMPTY,
        value: 0.0,
    };

    /// Higher value wins; near-ties go to the smaller set, then the lexicographically smaller one.
    fn offer(&mut self, assortment: Assortment, value: f64) {
        let take = if value > self.value + TIE_TOL {
            true
        } else if value < self.value - TIE_TOL {
            false
        } else {
            match assortment.len().cmp(&self.assortment.len()) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => assortment.lex_cmp(self.assortment) == Ordering::Less,
            }
        };
        if take {
            *self = OracleResult { assortment, value };
        }
    }
}

/// Σ_{j∈s} θ_j φ(j, s).
pub fn weighted_value(model: &ChoiceSpec, theta: &[f64], s: Assortment) -> Result<f64> {
    if let Some(v) = model.mnl_weights() {
        return Ok(mnl_value(v, theta, s));
    }
    let p = model.probs(s)?;
    Ok(s.iter().map(|j| theta[j] * p[j]).sum())
}

fn mnl_value(v: &[f64], theta: &[f64], s: Assortment) -> f64 {
    let (num, den) = s
        .iter()
        .fold((0.0, 1.0), |(a, b), j| (a + theta[j] * v[j], b + v[j]));
    num / den
}

fn clean_theta(model: &ChoiceSpec, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != model.universe() {
        return Err(Error::Domain(format!(
            "theta has {} entries for {} options",
            theta.len(),
            model.universe()
        )));
    }
    theta
        .iter()
        .map(|&t| {
            if t.is_nan() || t < -1e-9 {
                Err(Error::Domain(format!(
                    "negative weight {t} passed to the oracle"
                )))
            } else {
                Ok(t.max(0.0))
            }
        })
        .collect()
}

/// Assortments a model can be queried on, when it is not all of them.
fn listed_family(model: &ChoiceSpec) -> Option<Vec<Assortment>> {
    match model {
        ChoiceSpec::Tabular { rows, .. } => {
            let mut fam: Vec<Assortment> = std::iter::once(Assortment::EMPTY)
                .chain(rows.iter().map(|r| r.assortment))
                .collect();
            fam.sort();
            fam.dedup();
            Some(fam)
        }
        ChoiceSpec::Mixture { components, .. } => components
            .iter()
            .filter_map(listed_family)
            .reduce(|a, b| a.into_iter().filter(|s| b.contains(s)).collect()),
        _ => None,
    }
}

fn enumerate_within(
    model: &ChoiceSpec,
    ground: Assortment,
    budget: Budget,
    mut score: impl FnMut(Assortment) -> Result<f64>,
) -> Result<OracleResult> {
    let mut best = OracleResult::NONE;
    let fits = |s: Assortment| budget.is_none_or(|k| s.len() <= k);
    if let Some(fam) = listed_family(model) {
        for s in fam.into_iter().filter(|s| s.is_subset(ground) && fits(*s)) {
            best.offer(s, score(s)?);
        }
        return Ok(best);
    }
    if ground.len() > ENUM_LIMIT {
        return Err(Error::UnsupportedOracle(format!(
            "non-MNL model over {} options exceeds the enumeration limit {ENUM_LIMIT}",
            ground.len()
        )));
    }
    for s in ground.subsets().filter(|s| fits(*s)) {
        best.offer(s, score(s)?);
    }
    Ok(best)
}

/// Exhaustive search for max Σ θ_j φ(j,S) over budget-feasible S.
pub fn exhaustive_weighted(
    model: &ChoiceSpec,
    theta: &[f64],
    budget: Budget,
) -> Result<OracleResult> {
    let theta = clean_theta(model, theta)?;
    enumerate_within(model, Assortment::full(model.universe()), budget, |s| {
        weighted_value(model, &theta, s)
    })
}

/// max over |S| ≤ budget of Σ_{j∈S} θ_j φ(j,S).
pub fn best_weighted_assortment(
    model: &ChoiceSpec,
    theta: &[f64],
    budget: Budget,
) -> Result<OracleResult> {
    let theta = clean_theta(model, theta)?;
    match model.mnl_weights() {
        Some(v) => Ok(mnl_best(v, &theta, budget)),
        None => enumerate_within(model, Assortment::full(model.universe()), budget, |s| {
            weighted_value(model, &theta, s)
        }),
    }
}

fn mnl_best(v: &[f64], theta: &[f64], budget: Budget) -> OracleResult {
    let mut items: Vec<usize> = (0..v.len())
        .filter(|&j| v[j] > 0.0 && theta[j] > 0.0)
        .collect();
    let mut best = OracleResult::NONE;
    match budget {
        Some(k) if k < items.len() => {
            let mut zs = vec![0.0];
            for (a, &j) in items.iter().enumerate() {
                zs.push(theta[j]);
                for &l in &items[a + 1..] {
                    if v[j] != v[l] {
                        let z = (v[j] * theta[j] - v[l] * theta[l]) / (v[j] - v[l]);
                        if z > 0.0 && z.is_finite() {
                            zs.push(z);
                        }
                    }
                }
            }
            zs.sort_by(f64::total_cmp);
            zs.dedup();
            let mut probes = zs.clone();
            probes.extend(zs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            probes.push(zs.last().unwrap() + 1.0);
            let mut scored: Vec<(f64, usize)> = Vec::with_capacity(items.len());
            for z in probes {
                scored.clear();
                scored.extend(
                    items
                        .iter()
                        .map(|&j| (v[j] * (theta[j] - z), j))
                        .filter(|p| p.0 > 0.0),
                );
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let s = Assortment::from_indices(scored.iter().take(k).map(|p| p.1));
                best.offer(s, mnl_value(v, theta, s));
            }
        }
        _ => {
            items.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
            let mut s = Assortment::EMPTY;
            best.offer(s, 0.0);
            for &j in &items {
                s = s.with(j);
                best.offer(s, mnl_value(v, theta, s));
            }
        }
    }
    best
}

/// f^K(ground): best demand over sub-assortments of `ground` with at most K options.
pub fn constrained_demand(
    model: &ChoiceSpec,
    ground: Assortment,
    budget: Budget,
) -> Result<OracleResult> {
    if let Some(0) = budget {
        return Err(Error::Domain("budget must be at least 1".into()));
    }
    let Some(k) = budget else {
        return Ok(OracleResult {
            assortment: ground,
            value: model.demand(ground)?,
        });
    };
    if let Some(v) = model.mnl_weights() {
        if !ground.is_subset(Assortment::full(v.len())) {
            return Err(Error::Domain(format!(
                "ground set {ground:?} outside the universe"
            )));
        }
        let mut items: Vec<usize> = ground.iter().filter(|&j| v[j] > 0.0).collect();
        items.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        let s = Assortment::from_indices(items.into_iter().take(k));
        let w: f64 = s.iter().map(|j| v[j]).sum();
        return Ok(OracleResult {
            assortment: s,
            value: w / (1.0 + w),
        });
    }
    enumerate_within(model, ground, budget, |s| model.demand(s))
}

/// Tabulates a set function on `0..u` indexed by bitmask.
pub fn set_function_table(
    u: usize,
    mut f: impl FnMut(Assortment) -> Result<f64>,
) -> Result<Vec<f64>> {
    Assortment::full(u)
        .subsets()
        .map(&mut f)
        .collect::<Result<Vec<_>>>()
        .map(|vals| {
            let mut table = vec![0.0; 1 << u];
            for (s, val) in Assortment::full(u).subsets().zip(vals) {
                table[s.bits() as usize] = val;
            }
            table
        })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubmodularityCheck {
    pub submodular: bool,
    /// (element, smaller set, larger set) with a larger marginal on the larger set.
    pub witness: Option<(usize, Assortment, Assortment)>,
    pub exhaustive: bool,
}

pub const SUBMODULAR_EXHAUSTIVE: usize = 12;
pub const SUBMODULAR_SAMPLED: usize = 20;
const SUBMODULAR_SAMPLES: usize = 200_000;

/// Checks f(S+e) - f(S) ≥ f(L+e) - f(L) for S ⊆ L, e ∉ L on a table indexed by bitmask.
pub fn is_submodular(values: &[f64]) -> Result<SubmodularityCheck> {
    let u = values.len().trailing_zeros() as usize;
    if values.len() != 1 << u {
        return Err(Error::Domain(
            "set function table length must be a power of two".into(),
        ));
    }
    crate::error::cap("submodularity universe", u, SUBMODULAR_SAMPLED)?;
    let f = |s: u64| values[s as usize];
    let violates = |e: usize, s: u64, l: u64| f(s | 1 << e) - f(s) < f(l | 1 << e) - f(l) - 1e-12;
    let found = |e, s, l| SubmodularityCheck {
        submodular: false,
        witness: Some((e, Assortment::from_bits(s), Assortment::from_bits(l))),
        exhaustive: u <= SUBMODULAR_EXHAUSTIVE,
    };
    if u <= SUBMODULAR_EXHAUSTIVE {
        for l in 0..1u64 << u {
            for e in (0..u).filter(|e| l >> e & 1 == 0) {
                for s in Assortment::from_bits(l).subsets() {
                    if violates(e, s.bits(), l) {
                        return Ok(found(e, s.bits(), l));
                    }
                }
            }
        }
        return Ok(SubmodularityCheck {
            submodular: true,
            witness: None,
            exhaustive: true,
        });
    }
    let mut rng = rng_from_seed(0x5eed);
    for _ in 0..SUBMODULAR_SAMPLES {
        let e = rng.gen_range(0..u);
        let l = rng.gen::<u64>() & ((1u64 << u) - 1) & !(1u64 << e);
        let s = l & rng.gen::<u64>();
        if violates(e, s, l) {
            return Ok(found(e, s, l));
        }
    }
    Ok(SubmodularityCheck {
        submodular: true,
        witness: None,
        exhaustive: false,
    })
}
