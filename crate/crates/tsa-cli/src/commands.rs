use crate::config::{bad, Config};
use anyhow::Context;
use serde_json::{json, Map, Value};
use std::fs;
use std::path::Path;
use std::time::Duration;
use tsa_core::bounds::{
    gap_report, quantity_value, write_gap_csv, GapOptions, GapReport, QUANTITIES,
};
use tsa_core::exec::Exec;
use tsa_core::fullstatic::{approx_fully_static, ApproxOptions, SubproblemMode};
use tsa_core::generate::{generate_random_instance, rng_from_seed, tight_instance, TightKind};
use tsa_core::greedy::{
    cointoss_fully_adaptive, greedy_one_sided, sampling_side_selector, SamplingConfig,
};
use tsa_core::instance::{load_instance, save_instance};
use tsa_core::policy::{monte_carlo, run_rng, simulate_once, trace_to_jsonl, Policy, StaticPolicy};
use tsa_core::{Instance, Limits, Side};

struct Entry {
    label: String,
    n: usize,
    m: usize,
    seed: u64,
    inst: Instance,
}

fn corpus(cfg: &Config) -> Vec<Entry> {
    let mut out = Vec::new();
    for &(n, m) in &cfg.sizes {
        for s in 0..cfg.seeds {
            let seed = cfg.seed + s as u64;
            out.push(Entry {
                label: format!("n{n}_m{m}_s{seed}"),
                n,
                m,
                seed,
                inst: generate_random_instance(n, m, seed, cfg.profile()),
            });
        }
    }
    out
}

fn single(cfg: &Config) -> anyhow::Result<Option<Entry>> {
    let (label, inst) = if let Some(p) = &cfg.instance {
        let inst = load_instance(p).with_context(|| format!("loading {}", p.display()))?;
        (
            p.file_stem()
                .map_or("instance".into(), |s| s.to_string_lossy().into_owned()),
            inst,
        )
    } else if let Some(t) = &cfg.tight {
        let kind: TightKind = t.kind.parse()?;
        (format!("{}_n{}", t.kind, t.n), tight_instance(kind, t.n)?)
    } else {
        return Ok(None);
    };
    Ok(Some(Entry {
        label,
        n: inst.n(),
        m: inst.m(),
        seed: cfg.seed,
        inst,
    }))
}

fn require_single(cfg: &Config) -> anyhow::Result<Entry> {
    single(cfg)?.ok_or_else(|| bad("this command needs --instance or --tight with --n"))
}

fn gap_options(cfg: &Config, seed: u64, exec: Exec) -> GapOptions {
    GapOptions {
        limits: Limits::with_caps(cfg.caps.clone()),
        seed,
        sampling: SamplingConfig {
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            runs_override: cfg.runs_override,
            ..SamplingConfig::default()
        },
        static_runs: cfg.static_runs,
        mc_runs: cfg.mc_runs,
        approx: ApproxOptions {
            alpha: cfg.alpha,
            trials: cfg.trials,
            mode: SubproblemMode::Greedy,
        },
        exec,
        quantities: cfg.quantities.clone(),
        time_limit: cfg.time_limit_secs.map(Duration::from_secs_f64),
    }
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn generate(cfg: &Config) -> anyhow::Result<()> {
    let out = cfg.out_dir();
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest.write_record(["instance", "n", "m", "seed", "file"])?;
    for e in corpus(cfg) {
        let file = format!("instances/{}.json", e.label);
        fs::create_dir_all(out.join("instances"))?;
        save_instance(&e.inst, &out.join(&file))?;
        manifest.write_record([
            e.label,
            e.n.to_string(),
            e.m.to_string(),
            e.seed.to_string(),
            file,
        ])?;
    }
    write(&out.join("manifest.csv"), &manifest.into_inner()?)?;
    println!(
        "wrote {} instances to {}",
        cfg.sizes.len() * cfg.seeds,
        out.display()
    );
    Ok(())
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

pub fn solve(cfg: &Config) -> anyhow::Result<()> {
    let e = require_single(cfg)?;
    let opts = gap_options(cfg, e.seed, Exec::Sequential);
    let mut values = Map::new();
    let mut unavailable = Map::new();
    match &cfg.quantities {
        // explicit requests fail loudly so size caps and time limits reach the exit code
        Some(q) => {
            for name in q {
                values.insert(name.clone(), json!(quantity_value(&e.inst, name, &opts)?));
            }
        }
        None => {
            let rep = gap_report(&e.inst, &opts);
            for (k, name) in QUANTITIES.iter().enumerate() {
                values.insert(name.to_string(), opt_num(rep.values[k]));
            }
            for (name, why) in rep.unavailable {
                unavailable.insert(name, json!(why));
            }
        }
    }
    let doc = json!({ "instance": e.label, "seed": e.seed, "values": values, "unavailable": unavailable });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    if cfg.out.is_some() {
        write(
            &cfg.out_dir().join(format!("solve_{}.json", e.label)),
            text.as_bytes(),
        )?;
    }
    print!("{text}");
    Ok(())
}

pub fn simulate(cfg: &Config, trace: Option<&Path>) -> anyhow::Result<()> {
    let e = require_single(cfg)?;
    let inst = &e.inst;
    let policy: Box<dyn Policy> = match cfg.policy.as_str() {
        "greedy-customers" => Box::new(greedy_one_sided(inst, Side::Customers, None)?),
        "greedy-suppliers" => Box::new(greedy_one_sided(inst, Side::Suppliers, None)?),
        "sampling" => {
            let sc = SamplingConfig {
                epsilon: cfg.epsilon,
                delta: cfg.delta,
                runs_override: cfg.runs_override,
                ..SamplingConfig::default()
            };
            Box::new(sampling_side_selector(inst, &sc, e.seed)?)
        }
        "cointoss" => Box::new(cointoss_fully_adaptive(inst, e.seed)?),
        "fs-approx" => {
            let opts = ApproxOptions {
                alpha: cfg.alpha,
                trials: cfg.trials,
                mode: SubproblemMode::Greedy,
            };
            let rep = approx_fully_static(
                inst,
                opts,
                &mut rng_from_seed(e.seed),
                &Limits::with_caps(cfg.caps.clone()),
            )?;
            let (c, s) = rep.solution.displays(inst.m());
            Box::new(StaticPolicy {
                customer_sets: c,
                supplier_sets: s,
            })
        }
        other => return Err(bad(format!("unknown policy '{other}'"))),
    };
    let res = monte_carlo(inst, policy.as_ref(), cfg.runs, e.seed)?;
    if let Some(path) = trace {
        let (_, t) = simulate_once(inst, policy.as_ref(), &mut run_rng(e.seed, 0))?;
        write(path, trace_to_jsonl(&t).as_bytes())?;
    }
    let doc = json!({ "instance": e.label, "policy": cfg.policy, "mean": res.mean, "half_width": res.half_width, "runs": res.runs, "seed": res.seed });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn reports(cfg: &Config, entries: &[Entry]) -> Vec<GapReport> {
    // instance-level parallelism; each solve stays on one thread
    Exec::default_mode().map(entries.len(), |k| {
        gap_report(
            &entries[k].inst,
            &gap_options(cfg, entries[k].seed, Exec::Sequential),
        )
    })
}

pub fn gaps(cfg: &Config) -> anyhow::Result<()> {
    let entries = match single(cfg)? {
        Some(e) => vec![e],
        None => corpus(cfg),
    };
    let reps = reports(cfg, &entries);
    let labeled: Vec<(String, GapReport)> =
        entries.iter().map(|e| e.label.clone()).zip(reps).collect();
    let mut buf = Vec::new();
    write_gap_csv(&mut buf, &labeled)?;
    if cfg.out.is_some() {
        write(&cfg.out_dir().join("gaps.csv"), &buf)?;
    }
    print!("{}", String::from_utf8(buf)?);
    Ok(())
}

const TABLE1: &[&str] = &["alg_fs/opt_fs"];
const TABLE2: &[&str] = &[
    "opt_os/opt_fs",
    "ub_oa/alg_fs",
    "opt_oa/alg_os",
    "ub_oa/alg_os",
    "opt_fa/opt_oa",
    "ub_fa/alg_oa",
];
const TABLE3: &[&str] = &[
    "alg_oa/opt_oa",
    "alg_oa/ub_oa",
    "alg_fa/opt_fa",
    "alg_fa/ub_fa",
];

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn summary(xs: &[f64]) -> [String; 3] {
    if xs.is_empty() {
        return [String::new(), String::new(), String::new()];
    }
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [
        fmt(min),
        fmt(xs.iter().sum::<f64>() / xs.len() as f64),
        fmt(max),
    ]
}

/// One row per size with min/mean/max of each ratio over the instances where it is available.
fn table(
    cfg: &Config,
    entries: &[Entry],
    reps: &[GapReport],
    ratios: &[&str],
    timed: &[&str],
) -> anyhow::Result<Vec<u8>> {
    let names = GapReport::ratio_names();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n".to_string(), "m".into(), "instances".into()];
    for r in ratios {
        header.extend(["min", "mean", "max"].map(|s| format!("{r}_{s}")));
    }
    if cfg.timings {
        for q in timed {
            header.extend(["mean", "max"].map(|s| format!("time_{q}_{s}")));
        }
    }
    w.write_record(&header)?;
    for &(n, m) in &cfg.sizes {
        let idx: Vec<usize> = (0..entries.len())
            .filter(|&k| entries[k].n == n && entries[k].m == m)
            .collect();
        let mut row = vec![n.to_string(), m.to_string(), idx.len().to_string()];
        for r in ratios {
            let col = names.iter().position(|x| x == r).expect("known ratio");
            let xs: Vec<f64> = idx.iter().filter_map(|&k| reps[k].ratios[col]).collect();
            row.extend(summary(&xs));
        }
        if cfg.timings {
            for q in timed {
                let col = QUANTITIES
                    .iter()
                    .position(|x| x == q)
                    .expect("known quantity");
                let xs: Vec<f64> = idx
                    .iter()
                    .filter(|&&k| reps[k].values[col].is_some())
                    .map(|&k| reps[k].seconds[col])
                    .collect();
                let s = summary(&xs);
                row.extend([s[1].clone(), s[2].clone()]);
            }
        }
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

pub fn tables(cfg: &Config) -> anyhow::Result<()> {
    let out = cfg.out_dir();
    let entries = corpus(cfg);
    let reps = reports(cfg, &entries);
    let labeled: Vec<(String, GapReport)> = entries
        .iter()
        .map(|e| e.label.clone())
        .zip(reps.iter().cloned())
        .collect();
    let mut buf = Vec::new();
    write_gap_csv(&mut buf, &labeled)?;
    write(&out.join("instances.csv"), &buf)?;
    write(
        &out.join("table1.csv"),
        &table(cfg, &entries, &reps, TABLE1, &["opt_fs", "alg_fs"])?,
    )?;
    write(
        &out.join("table2.csv"),
        &table(cfg, &entries, &reps, TABLE2, &[])?,
    )?;
    write(
        &out.join("table3.csv"),
        &table(
            cfg,
            &entries,
            &reps,
            TABLE3,
            &["opt_oa", "ub_oa", "opt_fa", "ub_fa"],
        )?,
    )?;
    let meta = json!({
        "seed": cfg.seed,
        "seeds": cfg.seeds,
        "instance_seeds": entries.iter().map(|e| json!({ "instance": e.label, "seed": e.seed })).collect::<Vec<_>>(),
        "sizes": cfg.sizes,
        "distribution": cfg.distribution,
        "k_customer": cfg.k_customer,
        "k_supplier": cfg.k_supplier,
        "mc_runs": cfg.mc_runs,
        "caps": cfg.caps,
    });
    write(
        &out.join("metadata.json"),
        (serde_json::to_string_pretty(&meta)? + "\n").as_bytes(),
    )?;
    println!(
        "wrote tables for {} instances to {}",
        entries.len(),
        out.display()
    );
    Ok(())
}
