use crate::assortment::Assortment;
use crate::dp::{opt_fully_adaptive_with, opt_fully_static_with, opt_oa, opt_os, DpSearch};
use crate::error::{cap, Error, Result};
use crate::exec::Exec;
use crate::fullstatic::{approx_fully_static, ApproxOptions};
use crate::generate::rng_from_seed;
use crate::greedy::{
    cointoss_fully_adaptive, greedy_one_sided_static, sampling_side_selector_with, GreedyPolicy,
    SamplingConfig, SUPPLIER_STREAM_SALT,
};
use crate::instance::{fits, Instance, Side};
use crate::limits::{Deadline, Limits};
use crate::lp::{
    maximize_concave, solve_lp_with, ConcaveObjective, FwOptions, LpProblem, LpStatus,
};
use crate::oracle::constrained_demand;
use crate::policy::exact_value_deterministic_adaptive_with;
use serde::Serialize;
use std::time::Instant;

/// Optimal (λ, τ) of the subset-enumerated one-sided relaxation. Indices are in the orientation
/// where `side` initiates: τ is indexed by initiating agents, λ by responders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationSolution {
    pub side: Side,
    /// Nonzero λ_{j,C} per responder j.
    pub lambda: Vec<Vec<(Assortment, f64)>>,
    /// Nonzero τ_{i,S} per initiating agent i.
    pub tau: Vec<Vec<(Assortment, f64)>>,
    pub value: f64,
    /// p_ij = Σ_S τ_iS φ_i(j,S): the probability that j is in i's pick.
    pub marginals: Vec<Vec<f64>>,
    /// Σ_j E f_j(C) with C drawn from the product distribution of the marginals.
    pub independent_value: f64,
}

/// Relaxation of the one-sided adaptive problem over explicit subset distributions.
pub fn lp_relaxation_onesided(
    inst: &Instance,
    side: Side,
    constrained: bool,
) -> Result<RelaxationSolution> {
    lp_relaxation_onesided_with(inst, side, constrained, &Limits::default())
}

pub fn lp_relaxation_onesided_with(
    inst: &Instance,
    side: Side,
    constrained: bool,
    limits: &Limits,
) -> Result<RelaxationSolution> {
    cap(
        "max(n, m) for the subset relaxation",
        inst.n().max(inst.m()),
        limits.caps.relaxation_side,
    )?;
    let o = inst.oriented(side);
    let (n, m) = (o.n(), o.m());
    let subsets_n: Vec<Assortment> = Assortment::full(n).subsets().collect();
    let subsets_m: Vec<Assortment> = Assortment::full(m).subsets().collect();
    let f: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let k = if constrained { o.k_supplier[j] } else { None };
            subsets_n
                .iter()
                .map(|&c| constrained_demand(&o.suppliers[j], c, k).map(|r| r.value))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let tau_sets: Vec<Vec<(Assortment, Vec<f64>)>> = (0..n)
        .map(|i| {
            let k = if constrained { o.k_customer[i] } else { None };
            subsets_m
                .iter()
                .filter(|s| fits(**s, k))
                .map(|&s| o.customers[i].probs(s).map(|p| (s, p)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let lam_base = |j: usize| j * subsets_n.len();
    let mut tau_base = Vec::with_capacity(n);
    let mut next = m * subsets_n.len();
    for sets in &tau_sets {
        tau_base.push(next);
        next += sets.len();
    }
    let mut p = LpProblem::new(next);
    for j in 0..m {
        for (c, val) in f[j].iter().enumerate() {
            p.objective[lam_base(j) + c] = *val;
        }
        p.equal(
            (0..subsets_n.len())
                .map(|c| (lam_base(j) + c, 1.0))
                .collect(),
            1.0,
        );
    }
    for i in 0..n {
        for j in 0..m {
            let mut row: Vec<(usize, f64)> = subsets_n
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(i))
                .map(|(c, _)| (lam_base(j) + c, 1.0))
                .collect();
            row.extend(
                tau_sets[i]
                    .iter()
                    .enumerate()
                    .filter(|(_, (s, pr))| s.contains(j) && pr[j] != 0.0)
                    .map(|(t, (_, pr))| (tau_base[i] + t, -pr[j])),
            );
            p.equal(row, 0.0);
        }
        p.equal(
            (0..tau_sets[i].len())
                .map(|t| (tau_base[i] + t, 1.0))
                .collect(),
            1.0,
        );
    }
    let sol = solve_lp_with(&p, &limits.deadline)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "subset relaxation ended {:?}",
            sol.status
        )));
    }
    let lambda = (0..m)
        .map(|j| {
            subsets_n
                .iter()
                .enumerate()
                .filter(|(c, _)| sol.x[lam_base(j) + c] > 1e-12)
                .map(|(c, &s)| (s, sol.x[lam_base(j) + c]))
                .collect()
        })
        .collect();
    let tau: Vec<Vec<(Assortment, f64)>> = (0..n)
        .map(|i| {
            tau_sets[i]
                .iter()
                .enumerate()
                .filter(|(t, _)| sol.x[tau_base[i] + t] > 1e-12)
                .map(|(t, (s, _))| (*s, sol.x[tau_base[i] + t]))
                .collect()
        })
        .collect();
    let marginals: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    tau_sets[i]
                        .iter()
                        .enumerate()
                        .filter(|(_, (s, _))| s.contains(j))
                        .map(|(t, (_, pr))| sol.x[tau_base[i] + t] * pr[j])
                        .sum()
                })
                .collect()
        })
        .collect();
    let independent_value = (0..m)
        .map(|j| {
            subsets_n
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    f[j][c]
                        * (0..n)
                            .map(|i| {
                                if s.contains(i) {
                                    marginals[i][j]
                                } else {
                                    1.0 - marginals[i][j]
                                }
                            })
                            .product::<f64>()
                })
                .sum::<f64>()
        })
        .sum();
    Ok(RelaxationSolution {
        side,
        lambda,
        tau,
        value: sol.value,
        marginals,
        independent_value,
    })
}

struct SaturatedLoads<'a> {
    /// c[e] = v_ij w_ji for e = i*m + j
    coef: &'a [f64],
    m: usize,
}

impl SaturatedLoads<'_> {
    fn loads(&self, y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.m];
        for (e, (c, yv)) in self.coef.iter().zip(y).enumerate() {
            z[e % self.m] += c * yv;
        }
        z
    }
}

impl ConcaveObjective for SaturatedLoads<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        self.loads(y).into_iter().map(|z| z / (1.0 + z)).sum()
    }

    fn gradient(&self, y: &[f64], g: &mut [f64]) {
        let z = self.loads(y);
        for (e, c) in self.coef.iter().enumerate() {
            g[e] = c / ((1.0 + z[e % self.m]) * (1.0 + z[e % self.m]));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UbOa {
    /// max of the two certified bounds.
    pub value: f64,
    pub z_customers: f64,
    pub z_suppliers: f64,
}

/// Certified upper bound on OPT_OA for MNL markets via the saturated-load concave program.
pub fn ub_oa(inst: &Instance) -> Result<UbOa> {
    ub_oa_with(inst, &Limits::default())
}

pub fn ub_oa_with(inst: &Instance, limits: &Limits) -> Result<UbOa> {
    let mut z = [0.0; 2];
    for (k, side) in [Side::Customers, Side::Suppliers].into_iter().enumerate() {
        let o = inst.oriented(side);
        let (v, w) = o.mnl_matrices()?;
        let (n, m) = (o.n(), o.m());
        if n * m == 0 {
            continue;
        }
        let coef: Vec<f64> = (0..n * m)
            .map(|e| v[e / m][e % m] * w[e % m][e / m])
            .collect();
        let mut p = LpProblem::new(n * m);
        for i in 0..n {
            for j in 0..m {
                let mut row: Vec<(usize, f64)> = (0..m).map(|l| (i * m + l, v[i][l])).collect();
                row[j].1 += 1.0;
                p.le(row, 1.0);
            }
        }
        let r = maximize_concave(
            &SaturatedLoads { coef: &coef, m },
            &p,
            FwOptions::default(),
            &limits.deadline,
        )?;
        if r.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("concave bound ended {:?}", r.status)));
        }
        z[k] = r.certified_upper;
    }
    Ok(UbOa {
        value: z[0].max(z[1]),
        z_customers: z[0],
        z_suppliers: z[1],
    })
}

/// LP upper bound on OPT_FA for MNL markets.
pub fn ub_fa(inst: &Instance) -> Result<f64> {
    ub_fa_with(inst, &Limits::default())
}

pub fn ub_fa_with(inst: &Instance, limits: &Limits) -> Result<f64> {
    let (v, w) = inst.mnl_matrices()?;
    let (n, m) = (inst.n(), inst.m());
    let mut p = LpProblem::new(n * m);
    p.objective.iter_mut().for_each(|c| *c = 1.0);
    for i in 0..n {
        for j in 0..m {
            let e = i * m + j;
            let mut row: Vec<(usize, f64)> = (0..m).map(|l| (i * m + l, v[i][j])).collect();
            row[j].1 += 1.0;
            p.le(row, v[i][j]);
            let mut col: Vec<(usize, f64)> = (0..n).map(|k| (k * m + j, w[j][i])).collect();
            col[i].1 += 1.0;
            debug_assert_eq!(col[i].0, e);
            p.le(col, w[j][i]);
        }
    }
    let sol = solve_lp_with(&p, &limits.deadline)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "fully adaptive LP bound ended {:?}",
            sol.status
        )));
    }
    Ok(sol.value)
}

/// How ALG values of adaptive policies were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug)]
pub struct GapOptions {
    pub limits: Limits,
    pub seed: u64,
    pub sampling: SamplingConfig,
    /// Greedy runs per side when building ALG_OS.
    pub static_runs: usize,
    /// Conditional Monte Carlo runs when a greedy policy is too large to evaluate exactly.
    pub mc_runs: usize,
    pub approx: ApproxOptions,
    pub exec: Exec,
    /// Names from `QUANTITIES` to compute; `None` computes all of them.
    pub quantities: Option<Vec<String>>,
    /// Per-quantity wall-clock limit.
    pub time_limit: Option<std::time::Duration>,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            limits: Limits::default(),
            seed: 0,
            sampling: SamplingConfig::default(),
            static_runs: 20,
            mc_runs: 10_000,
            approx: ApproxOptions::default(),
            exec: Exec::default_mode(),
            quantities: None,
            time_limit: None,
        }
    }
}

pub const QUANTITIES: [&str; 11] = [
    "opt_fs", "opt_os", "opt_oa", "opt_fa", "alg_fs", "alg_os", "alg_oa", "alg_fa", "z_lp2",
    "ub_oa", "ub_fa",
];

pub const RATIOS: [(&str, &str); 11] = [
    ("opt_os", "opt_fs"),
    ("ub_oa", "alg_fs"),
    ("opt_oa", "alg_os"),
    ("ub_oa", "alg_os"),
    ("opt_fa", "opt_oa"),
    ("ub_fa", "alg_oa"),
    ("alg_fs", "opt_fs"),
    ("alg_oa", "opt_oa"),
    ("alg_fa", "opt_fa"),
    ("alg_oa", "ub_oa"),
    ("alg_fa", "ub_fa"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// Values in `QUANTITIES` order; None when unavailable.
    pub values: Vec<Option<f64>>,
    /// Reasons for unavailable values, keyed by quantity name.
    pub unavailable: Vec<(String, String)>,
    /// Values in `RATIOS` order.
    pub ratios: Vec<Option<f64>>,
    pub verdicts: Vec<Verdict>,
    pub adaptive_evaluation: Option<Evaluation>,
    /// Wall-clock seconds per quantity; never written to the CSV.
    pub seconds: Vec<f64>,
}

impl GapReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        QUANTITIES
            .iter()
            .position(|q| *q == name)
            .and_then(|k| self.values[k])
    }

    pub fn ratio(&self, num: &str, den: &str) -> Option<f64> {
        RATIOS
            .iter()
            .position(|r| *r == (num, den))
            .and_then(|k| self.ratios[k])
    }

    pub fn ratio_names() -> Vec<String> {
        RATIOS.iter().map(|(a, b)| format!("{a}/{b}")).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["instance".to_string()];
        h.extend(QUANTITIES.iter().map(|s| s.to_string()));
        h.extend(Self::ratio_names());
        h.push("verdicts".into());
        h
    }

    pub fn csv_record(&self, label: &str) -> Vec<String> {
        let cell = |x: &Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut r = vec![label.to_string()];
        r.extend(self.values.iter().map(cell));
        r.extend(self.ratios.iter().map(cell));
        r.push(if self.verdicts.is_empty() {
            String::new()
        } else if self.all_pass() {
            "pass".into()
        } else {
            "fail".into()
        });
        r
    }
}

/// Writes one row per labeled report; unavailable cells are empty.
pub fn write_gap_csv<W: std::io::Write>(out: W, reports: &[(String, GapReport)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    wr.write_record(GapReport::csv_header()).map_err(io)?;
    for (label, r) in reports {
        wr.write_record(r.csv_record(label)).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Exact value of a one-sided greedy, or its conditional Monte Carlo estimate above the cap.
fn greedy_value(
    inst: &Instance,
    g: &GreedyPolicy,
    opts: &GapOptions,
    seed: u64,
) -> Result<(f64, Evaluation)> {
    match exact_value_deterministic_adaptive_with(inst, g, &opts.limits) {
        Ok(v) => Ok((v, Evaluation::Exact)),
        Err(Error::SizeCap { .. }) => Ok((
            g.conditional_monte_carlo(inst, opts.mc_runs, seed, opts.exec)?
                .mean,
            Evaluation::MonteCarlo,
        )),
        Err(e) => Err(e),
    }
}

/// One named quantity from `QUANTITIES`, with errors passed through.
pub fn quantity_value(inst: &Instance, name: &str, opts: &GapOptions) -> Result<f64> {
    let limits = Limits {
        caps: opts.limits.caps.clone(),
        deadline: opts
            .time_limit
            .map_or(opts.limits.deadline, Deadline::after),
    };
    quantity(inst, name, opts, &limits, &mut None)
}

fn quantity(
    inst: &Instance,
    name: &str,
    opts: &GapOptions,
    limits: &Limits,
    eval: &mut Option<Evaluation>,
) -> Result<f64> {
    let opts = &GapOptions {
        limits: limits.clone(),
        ..opts.clone()
    };
    match name {
        "opt_fs" => opt_fully_static_with(inst, limits).map(|s| s.value),
        "opt_os" => opt_os(inst, limits),
        "opt_oa" => opt_oa(inst, limits),
        "opt_fa" => opt_fully_adaptive_with(inst, limits, DpSearch::Oracle).map(|d| d.value),
        "alg_fs" => approx_fully_static(inst, opts.approx, &mut rng_from_seed(opts.seed), limits)
            .map(|r| r.solution.value),
        "alg_os" => {
            greedy_one_sided_static(inst, opts.static_runs, opts.seed, limits).map(|g| g.value)
        }
        "alg_oa" => {
            let p = sampling_side_selector_with(inst, &opts.sampling, opts.seed, opts.exec)?;
            let (v, e) = greedy_value(inst, &p.greedy, opts, opts.seed)?;
            *eval = Some(e);
            Ok(v)
        }
        "alg_fa" => {
            let c = cointoss_fully_adaptive(inst, opts.seed)?;
            let (a, e) = greedy_value(inst, &c.customers, opts, opts.seed)?;
            let (b, _) = greedy_value(inst, &c.suppliers, opts, opts.seed ^ SUPPLIER_STREAM_SALT)?;
            *eval = Some(e);
            Ok(0.5 * (a + b))
        }
        "z_lp2" => [Side::Customers, Side::Suppliers]
            .into_iter()
            .map(|s| {
                lp_relaxation_onesided_with(inst, s, inst.is_constrained(), limits).map(|r| r.value)
            })
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v))),
        "ub_oa" => ub_oa_with(inst, limits).map(|u| u.value),
        "ub_fa" => ub_fa_with(inst, limits),
        other => Err(Error::Invalid(format!("unknown quantity '{other}'"))),
    }
}

/// Computes every size-feasible optimum, algorithm value and bound for one instance.
pub fn gap_report(inst: &Instance, opts: &GapOptions) -> GapReport {
    let mut eval = None;
    let mut values = Vec::with_capacity(QUANTITIES.len());
    let mut unavailable = Vec::new();
    let mut seconds = Vec::with_capacity(QUANTITIES.len());
    for name in QUANTITIES {
        if opts
            .quantities
            .as_ref()
            .is_some_and(|q| !q.iter().any(|x| x == name))
        {
            values.push(None);
            unavailable.push((name.to_string(), "not requested".to_string()));
            seconds.push(0.0);
            continue;
        }
        let limits = Limits {
            caps: opts.limits.caps.clone(),
            deadline: opts
                .time_limit
                .map_or(opts.limits.deadline, Deadline::after),
        };
        let started = Instant::now();
        let r = quantity(inst, name, opts, &limits, &mut eval);
        seconds.push(started.elapsed().as_secs_f64());
        match r {
            Ok(v) => values.push(Some(v)),
            Err(e) => {
                values.push(None);
                unavailable.push((name.to_string(), e.to_string()));
            }
        }
    }
    let get = |name: &str| {
        QUANTITIES
            .iter()
            .position(|q| *q == name)
            .and_then(|k| values[k])
    };
    let ratios = RATIOS
        .iter()
        .map(|(a, b)| match (get(a), get(b)) {
            (Some(x), Some(y)) if y > 1e-12 => Some(x / y),
            _ => None,
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut check = |name: &str, lhs: &str, factor: f64, rhs: &str, tol: f64| {
        if let (Some(l), Some(r)) = (get(lhs), get(rhs)) {
            verdicts.push(Verdict {
                check: name.to_string(),
                pass: l <= factor * r + tol,
            });
        }
    };
    let e_ratio = std::f64::consts::E / (std::f64::consts::E - 1.0);
    check("opt_fs <= opt_os", "opt_fs", 1.0, "opt_os", 1e-9);
    check("opt_os <= opt_oa", "opt_os", 1.0, "opt_oa", 1e-9);
    check("opt_oa <= opt_fa", "opt_oa", 1.0, "opt_fa", 1e-9);
    check("opt_fa <= 2 opt_oa", "opt_fa", 2.0, "opt_oa", 1e-9);
    check(
        "opt_oa <= e/(e-1) opt_os",
        "opt_oa",
        e_ratio,
        "opt_os",
        1e-9,
    );
    check("opt_oa <= z_lp2", "opt_oa", 1.0, "z_lp2", 1e-6);
    check("opt_oa <= ub_oa", "opt_oa", 1.0, "ub_oa", 1e-6);
    check("opt_fa <= ub_fa", "opt_fa", 1.0, "ub_fa", 1e-6);
    check(
        "0.067 opt_fs <= alg_fs",
        "opt_fs",
        1.0 / 0.067,
        "alg_fs",
        1e-9,
    );
    check("alg_fs <= opt_fs", "alg_fs", 1.0, "opt_fs", 1e-9);
    check("opt_fa <= 4 alg_fa", "opt_fa", 4.0, "alg_fa", 1e-9);
    GapReport {
        values,
        unavailable,
        ratios,
        verdicts,
        adaptive_evaluation: eval,
        seconds,
    }
}
