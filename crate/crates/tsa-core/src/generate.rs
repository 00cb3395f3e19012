use crate::assortment::Assortment;
use crate::choice::{ChoiceSpec, TabularRow};
use crate::error::{Error, Result};
use crate::instance::{CardinalityProfile, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The PRNG behind every seeded routine in this crate.
pub type TsaRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TsaRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exp(1) by inverse CDF.
pub fn sample_exp1<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

/// Customer weights v_ij ~ U[0,1], supplier weights w_ji ~ Exp(1).
pub fn generate_random_instance(
    n: usize,
    m: usize,
    seed: u64,
    profile: CardinalityProfile,
) -> Instance {
    let mut rng = rng_from_seed(seed);
    let v: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let w: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| sample_exp1(&mut rng)).collect())
        .collect();
    Instance::mnl(v, w)
        .expect("generated weights are valid")
        .with_profile(profile)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TightKind {
    Prop1,
    Lemma3,
    Lemma6,
    Thm3,
}

impl std::str::FromStr for TightKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop1" => Ok(TightKind::Prop1),
            "lemma3" => Ok(TightKind::Lemma3),
            "lemma6" => Ok(TightKind::Lemma6),
            "thm3" => Ok(TightKind::Thm3),
            other => Err(Error::Invalid(format!(
                "unknown tight instance kind '{other}'"
            ))),
        }
    }
}

pub fn tight_instance(kind: TightKind, n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Invalid("tight instances need n >= 2".into()));
    }
    let nf = n as f64;
    match kind {
        TightKind::Prop1 => {
            let customers = vec![ChoiceSpec::mnl(vec![1.0 / (nf - 1.0)]); n];
            Instance::new(customers, vec![ChoiceSpec::uniform(n)])
        }
        TightKind::Lemma3 => Instance::new(
            vec![ChoiceSpec::uniform(n); n],
            vec![ChoiceSpec::beta_exponential(n); n],
        ),
        TightKind::Lemma6 => {
            // Agent 0 on each side is uniform over the other side's agents 1..n;
            // every other agent only values the opposite agent 0.
            let hub = ChoiceSpec::uniform_on(n, Assortment::full(n).without(0));
            let mut spoke = vec![0.0; n];
            spoke[0] = 1.0 / (nf - 1.0);
            let side: Vec<ChoiceSpec> = std::iter::once(hub)
                .chain(std::iter::repeat_n(ChoiceSpec::mnl(spoke), n - 1))
                .collect();
            Instance::new(side.clone(), side)
        }
        TightKind::Thm3 => {
            let w = 1.0 / nf.sqrt();
            let first = Assortment::full(n);
            let second = Assortment::full(2 * n).minus(first);
            let mnl_on = |block: Assortment| {
                ChoiceSpec::mnl(
                    (0..2 * n)
                        .map(|k| if block.contains(k) { w } else { 0.0 })
                        .collect(),
                )
            };
            let customers = (0..2 * n)
                .map(|i| {
                    if i < n {
                        mnl_on(first)
                    } else {
                        ChoiceSpec::uniform_on(2 * n, second)
                    }
                })
                .collect();
            let suppliers = (0..2 * n)
                .map(|j| {
                    if j < n {
                        ChoiceSpec::uniform_on(2 * n, first)
                    } else {
                        mnl_on(second)
                    }
                })
                .collect();
            Instance::new(customers, suppliers)
        }
    }
}

/// Two-component mixture over four options whose K = 2 constrained demand is not submodular.
/// The first component has weights (1, 1, 0, ∞); its limit is tabulated on every assortment,
/// with option 3 taken surely whenever offered. The second is MNL with weights (0, 0, 1, 0).
pub fn submodularity_counterexample() -> ChoiceSpec {
    let rows = Assortment::full(4)
        .subsets()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let members = s.to_vec();
            if s.contains(3) {
                let probs = members
                    .iter()
                    .map(|&j| if j == 3 { 1.0 } else { 0.0 })
                    .collect();
                TabularRow {
                    assortment: s,
                    probs,
                    outside: 0.0,
                }
            } else {
                let w = members.iter().filter(|&&j| j < 2).count() as f64;
                let probs = members
                    .iter()
                    .map(|&j| if j < 2 { 1.0 / (1.0 + w) } else { 0.0 })
                    .collect();
                TabularRow {
                    assortment: s,
                    probs,
                    outside: 1.0 / (1.0 + w),
                }
            }
        })
        .collect();
    ChoiceSpec::Mixture {
        components: vec![
            ChoiceSpec::Tabular { options: 4, rows },
            ChoiceSpec::mnl(vec![0.0, 0.0, 1.0, 0.0]),
        ],
        arrival_probs: vec![0.5, 0.5],
    }
}
