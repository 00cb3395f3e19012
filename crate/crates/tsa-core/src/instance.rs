use crate::assortment::Assortment;
use crate::choice::ChoiceSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Per-agent assortment budget; `None` is unbounded.
pub type Budget = Option<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Customers,
    Suppliers,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Customers => Side::Suppliers,
            Side::Suppliers => Side::Customers,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Customers => "C",
            Side::Suppliers => "S",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CardinalityProfile {
    Unconstrained,
    /// Only the initiating side is budgeted.
    OneWay {
        initiating: Side,
        k: usize,
    },
    TwoWay {
        k_customer: usize,
        k_supplier: usize,
    },
}

/// A bipartite market: customers choose among suppliers and vice versa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    pub customers: Vec<ChoiceSpec>,
    pub suppliers: Vec<ChoiceSpec>,
    pub k_customer: Vec<Budget>,
    pub k_supplier: Vec<Budget>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    m: usize,
    customers: Vec<ChoiceSpec>,
    suppliers: Vec<ChoiceSpec>,
    #[serde(default)]
    k_customer: Option<Vec<Budget>>,
    #[serde(default)]
    k_supplier: Option<Vec<Budget>>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;
    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.customers.len() != f.n {
            return Err(Error::Invalid(format!(
                "customers: {} models for n = {}",
                f.customers.len(),
                f.n
            )));
        }
        if f.suppliers.len() != f.m {
            return Err(Error::Invalid(format!(
                "suppliers: {} models for m = {}",
                f.suppliers.len(),
                f.m
            )));
        }
        let inst = Instance {
            k_customer: f.k_customer.unwrap_or_else(|| vec![None; f.n]),
            k_supplier: f.k_supplier.unwrap_or_else(|| vec![None; f.m]),
            customers: f.customers,
            suppliers: f.suppliers,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<Instance> for InstanceFile {
    fn from(i: Instance) -> Self {
        InstanceFile {
            n: i.n(),
            m: i.m(),
            customers: i.customers,
            suppliers: i.suppliers,
            k_customer: Some(i.k_customer),
            k_supplier: Some(i.k_supplier),
        }
    }
}

impl Instance {
    pub fn new(customers: Vec<ChoiceSpec>, suppliers: Vec<ChoiceSpec>) -> Result<Self> {
        let inst = Instance {
            k_customer: vec![None; customers.len()],
            k_supplier: vec![None; suppliers.len()],
            customers,
            suppliers,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn empty() -> Self {
        Instance {
            customers: vec![],
            suppliers: vec![],
            k_customer: vec![],
            k_supplier: vec![],
        }
    }

    /// MNL on both sides; `v[i][j]` customer weights and `w[j][i]` supplier weights.
    pub fn mnl(v: Vec<Vec<f64>>, w: Vec<Vec<f64>>) -> Result<Self> {
        Instance::new(
            v.into_iter().map(ChoiceSpec::mnl).collect(),
            w.into_iter().map(ChoiceSpec::mnl).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.customers.len()
    }

    pub fn m(&self) -> usize {
        self.suppliers.len()
    }

    pub fn size(&self, side: Side) -> usize {
        match side {
            Side::Customers => self.n(),
            Side::Suppliers => self.m(),
        }
    }

    pub fn models(&self, side: Side) -> &[ChoiceSpec] {
        match side {
            Side::Customers => &self.customers,
            Side::Suppliers => &self.suppliers,
        }
    }

    pub fn budgets(&self, side: Side) -> &[Budget] {
        match side {
            Side::Customers => &self.k_customer,
            Side::Suppliers => &self.k_supplier,
        }
    }

    pub fn is_constrained(&self) -> bool {
        self.k_customer
            .iter()
            .chain(&self.k_supplier)
            .any(Option::is_some)
    }

    pub fn is_mnl(&self) -> bool {
        self.customers
            .iter()
            .chain(&self.suppliers)
            .all(|c| c.mnl_weights().is_some())
    }

    /// v_ij for MNL customers, w_ji for MNL suppliers.
    pub fn mnl_matrices(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let grab = |ms: &[ChoiceSpec]| -> Result<Vec<Vec<f64>>> {
            ms.iter()
                .map(|c| {
                    c.mnl_weights().map(<[f64]>::to_vec).ok_or_else(|| {
                        Error::UnsupportedOracle("MNL models required on both sides".into())
                    })
                })
                .collect()
        };
        Ok((grab(&self.customers)?, grab(&self.suppliers)?))
    }

    /// Swaps the roles of customers and suppliers.
    pub fn transposed(&self) -> Instance {
        Instance {
            customers: self.suppliers.clone(),
            suppliers: self.customers.clone(),
            k_customer: self.k_supplier.clone(),
            k_supplier: self.k_customer.clone(),
        }
    }

    /// The instance seen from `side` as the customer side.
    pub fn oriented(&self, side: Side) -> std::borrow::Cow<'_, Instance> {
        match side {
            Side::Customers => std::borrow::Cow::Borrowed(self),
            Side::Suppliers => std::borrow::Cow::Owned(self.transposed()),
        }
    }

    pub fn with_profile(mut self, profile: CardinalityProfile) -> Self {
        let (n, m) = (self.n(), self.m());
        let (kc, ks) = match profile {
            CardinalityProfile::Unconstrained => (None, None),
            CardinalityProfile::OneWay {
                initiating: Side::Customers,
                k,
            } => (Some(k), None),
            CardinalityProfile::OneWay {
                initiating: Side::Suppliers,
                k,
            } => (None, Some(k)),
            CardinalityProfile::TwoWay {
                k_customer,
                k_supplier,
            } => (Some(k_customer), Some(k_supplier)),
        };
        self.k_customer = vec![kc; n];
        self.k_supplier = vec![ks; m];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_customer.len() != self.n() || self.k_supplier.len() != self.m() {
            return Err(Error::Invalid("budget lists must match n and m".into()));
        }
        for (i, c) in self.customers.iter().enumerate() {
            c.validate(&format!("customers[{i}]"))?;
            if c.universe() != self.m() {
                return Err(Error::Invalid(format!(
                    "customers[{i}] has {} options, expected m = {}",
                    c.universe(),
                    self.m()
                )));
            }
        }
        for (j, c) in self.suppliers.iter().enumerate() {
            c.validate(&format!("suppliers[{j}]"))?;
            if c.universe() != self.n() {
                return Err(Error::Invalid(format!(
                    "suppliers[{j}] has {} options, expected n = {}",
                    c.universe(),
                    self.n()
                )));
            }
        }
        for (name, ks) in [
            ("k_customer", &self.k_customer),
            ("k_supplier", &self.k_supplier),
        ] {
            if let Some(pos) = ks.iter().position(|k| *k == Some(0)) {
                return Err(Error::Invalid(format!(
                    "{name}[{pos}] must be at least 1 or null"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Whether an assortment fits a budget.
pub fn fits(s: Assortment, k: Budget) -> bool {
    k.is_none_or(|k| s.len() <= k)
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    std::fs::write(path, inst.to_json())?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    Instance::from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
