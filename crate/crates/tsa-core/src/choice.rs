use crate::assortment::{Assortment, MAX_UNIVERSE};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const PROB_TOL: f64 = 1e-9;

/// A discrete choice model over options `0..universe()` plus an outside option.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChoiceSpec {
    /// Multinomial logit with outside weight 1.
    Mnl { weights: Vec<f64> },
    /// Explicit distributions for listed assortments only. The empty assortment is implicit.
    Tabular {
        options: usize,
        rows: Vec<TabularRow>,
    },
    Mixture {
        components: Vec<ChoiceSpec>,
        arrival_probs: Vec<f64>,
    },
    /// Uniform over the offered options inside `support`; outside only when none is offered.
    UniformNoOutside {
        options: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Assortment>,
    },
    /// Picks something with probability `betas[k-1]` when shown `k` options, uniformly among them.
    BetaUniform { betas: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularRow {
    pub assortment: Assortment,
    /// Aligned with the members of `assortment` in ascending id order.
    pub probs: Vec<f64>,
    pub outside: f64,
}

impl ChoiceSpec {
    pub fn mnl(weights: Vec<f64>) -> Self {
        ChoiceSpec::Mnl { weights }
    }

    pub fn uniform(options: usize) -> Self {
        ChoiceSpec::UniformNoOutside {
            options,
            support: None,
        }
    }

    pub fn uniform_on(options: usize, support: Assortment) -> Self {
        ChoiceSpec::UniformNoOutside {
            options,
            support: Some(support),
        }
    }

    /// betas_k = k(1 - e^{-1/k}).
    pub fn beta_exponential(options: usize) -> Self {
        ChoiceSpec::BetaUniform {
            betas: (1..=options).map(beta_k).collect(),
        }
    }

    pub fn universe(&self) -> usize {
        match self {
            ChoiceSpec::Mnl { weights } => weights.len(),
            ChoiceSpec::Tabular { options, .. } | ChoiceSpec::UniformNoOutside { options, .. } => {
                *options
            }
            ChoiceSpec::Mixture { components, .. } => {
                components.first().map_or(0, |c| c.universe())
            }
            ChoiceSpec::BetaUniform { betas } => betas.len(),
        }
    }

    pub fn mnl_weights(&self) -> Option<&[f64]> {
        match self {
            ChoiceSpec::Mnl { weights } => Some(weights),
            _ => None,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(format!("{path}: {msg}")));
        if self.universe() > MAX_UNIVERSE {
            return bad(format!(
                "{} options exceeds {MAX_UNIVERSE}",
                self.universe()
            ));
        }
        match self {
            ChoiceSpec::Mnl { weights } => {
                for (j, w) in weights.iter().enumerate() {
                    if !w.is_finite() || *w < 0.0 {
                        return bad(format!("weights[{j}] = {w} must be finite and nonnegative"));
                    }
                }
            }
            ChoiceSpec::Tabular { options, rows } => {
                let full = Assortment::full(*options);
                for (r, row) in rows.iter().enumerate() {
                    if !row.assortment.is_subset(full) {
                        return bad(format!(
                            "rows[{r}].assortment leaves the {options}-option universe"
                        ));
                    }
                    if row.probs.len() != row.assortment.len() {
                        return bad(format!(
                            "rows[{r}].probs has {} entries for {} options",
                            row.probs.len(),
                            row.assortment.len()
                        ));
                    }
                    let mut sum = row.outside;
                    for p in row.probs.iter().chain(std::iter::once(&row.outside)) {
                        if !p.is_finite() || *p < 0.0 {
                            return bad(format!("rows[{r}] has invalid probability {p}"));
                        }
                    }
                    sum += row.probs.iter().sum::<f64>();
                    if (sum - 1.0).abs() > PROB_TOL {
                        return bad(format!("rows[{r}] sums to {sum}, not 1"));
                    }
                    if rows[..r].iter().any(|o| o.assortment == row.assortment) {
                        return bad(format!("rows[{r}] repeats assortment {:?}", row.assortment));
                    }
                }
            }
            ChoiceSpec::Mixture {
                components,
                arrival_probs,
            } => {
                if components.is_empty() {
                    return bad("mixture has no components".into());
                }
                if components.len() != arrival_probs.len() {
                    return bad("arrival_probs length differs from components".into());
                }
                let u = components[0].universe();
                for (k, c) in components.iter().enumerate() {
                    c.validate(&format!("{path}.components[{k}]"))?;
                    if c.universe() != u {
                        return bad(format!(
                            "components[{k}] has {} options, expected {u}",
                            c.universe()
                        ));
                    }
                }
                if arrival_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad("arrival_probs must be nonnegative".into());
                }
                let s: f64 = arrival_probs.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return bad(format!("arrival_probs sums to {s}, not 1"));
                }
            }
            ChoiceSpec::UniformNoOutside { options, support } => {
                if let Some(s) = support {
                    if !s.is_subset(Assortment::full(*options)) {
                        return bad("support leaves the option universe".into());
                    }
                }
            }
            ChoiceSpec::BetaUniform { betas } => {
                for (k, b) in betas.iter().enumerate() {
                    if !b.is_finite() || !(0.0..=1.0).contains(b) {
                        return bad(format!("betas[{k}] = {b} must lie in [0,1]"));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_assortment(&self, s: Assortment) -> Result<()> {
        if s.is_subset(Assortment::full(self.universe())) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "assortment {s:?} outside the {}-option universe",
                self.universe()
            )))
        }
    }

    /// Writes φ(j, s) into `buf[j]` for every option j; non-members get 0.
    pub fn probs_into(&self, s: Assortment, buf: &mut [f64]) -> Result<()> {
        self.check_assortment(s)?;
        let u = self.universe();
        buf[..u].fill(0.0);
        self.accumulate(s, 1.0, buf)
    }

    fn accumulate(&self, s: Assortment, scale: f64, buf: &mut [f64]) -> Result<()> {
        if s.is_empty() {
            return Ok(());
        }
        match self {
            ChoiceSpec::Mnl { weights } => {
                let denom = 1.0 + s.iter().map(|j| weights[j]).sum::<f64>();
                for j in s.iter() {
                    buf[j] += scale * weights[j] / denom;
                }
            }
            ChoiceSpec::Tabular { rows, .. } => {
                let row = rows
                    .iter()
                    .find(|r| r.assortment == s)
                    .ok_or_else(|| Error::Domain(format!("tabular model has no row for {s:?}")))?;
                for (j, p) in s.iter().zip(&row.probs) {
                    buf[j] += scale * p;
                }
            }
            ChoiceSpec::Mixture {
                components,
                arrival_probs,
            } => {
                for (c, a) in components.iter().zip(arrival_probs) {
                    if *a > 0.0 {
                        c.accumulate(s, scale * a, buf)?;
                    }
                }
            }
            ChoiceSpec::UniformNoOutside { support, .. } => {
                let eligible = support.map_or(s, |sup| s.intersect(sup));
                let k = eligible.len();
                for j in eligible.iter() {
                    buf[j] += scale / k as f64;
                }
            }
            ChoiceSpec::BetaUniform { betas } => {
                let k = s.len();
                for j in s.iter() {
                    buf[j] += scale * betas[k - 1] / k as f64;
                }
            }
        }
        Ok(())
    }

    pub fn probs(&self, s: Assortment) -> Result<Vec<f64>> {
        let mut buf = vec![0.0; self.universe()];
        self.probs_into(s, &mut buf)?;
        Ok(buf)
    }

    /// φ(j, s); zero when j is not offered.
    pub fn prob(&self, j: usize, s: Assortment) -> Result<f64> {
        if j >= self.universe() {
            return Err(Error::Domain(format!("unknown option {j}")));
        }
        if !s.contains(j) {
            self.check_assortment(s)?;
            return Ok(0.0);
        }
        if let ChoiceSpec::Mnl { weights } = self {
            self.check_assortment(s)?;
            return Ok(weights[j] / (1.0 + s.iter().map(|l| weights[l]).sum::<f64>()));
        }
        Ok(self.probs(s)?[j])
    }

    /// f(s) = Σ_{j∈s} φ(j, s).
    pub fn demand(&self, s: Assortment) -> Result<f64> {
        if let ChoiceSpec::Mnl { weights } = self {
            self.check_assortment(s)?;
            let w: f64 = s.iter().map(|j| weights[j]).sum();
            return Ok(w / (1.0 + w));
        }
        Ok(self.probs(s)?.iter().sum())
    }

    /// Draws a choice given a uniform `u` in [0,1); `None` is the outside option.
    pub fn sample(&self, s: Assortment, u: f64) -> Result<Option<usize>> {
        let p = self.probs(s)?;
        let mut acc = 0.0;
        for j in s.iter() {
            acc += p[j];
            if u < acc {
                return Ok(Some(j));
            }
        }
        Ok(None)
    }
}

pub fn beta_k(k: usize) -> f64 {
    let k = k as f64;
    k * (1.0 - (-1.0 / k).exp())
}

/// φ(option, s) where `None` denotes the outside option.
pub fn choice_prob(model: &ChoiceSpec, option: Option<usize>, s: Assortment) -> Result<f64> {
    match option {
        Some(j) => model.prob(j, s),
        None => Ok(1.0 - model.demand(s)?),
    }
}

pub fn demand(model: &ChoiceSpec, s: Assortment) -> Result<f64> {
    model.demand(s)
}
