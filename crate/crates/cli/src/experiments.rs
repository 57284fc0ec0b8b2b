//! Experiment runners. Each returns its CSV files and a JSON result block;
//! nothing here touches the file system.

use std::collections::BTreeMap;

use digitfreq_core::digitkit::{Digit, DigitSource};
use digitfreq_core::fractal::{
    cf_bound_certificate, construct_gzb, construct_up_point, hd_bernoulli, hd_markov_law, local_dimension_trace,
    DimensionResult, PointMode,
};
use digitfreq_core::measures::{cylinder_mass, sample_stream, Law};
use digitfreq_core::mixing::{
    assumption_report, brute_force_psi, centering_decay, interpolation_bounds, log_linear_fit, mixing_report,
    mixingale_decay,
};
use digitfreq_core::nonconv::{
    count_all_frequencies, count_all_pair_frequencies, default_checkpoints, run_components, run_slln,
    ConvergenceTrace,
};
use digitfreq_core::observables::{decompose, HolderConstants, DEFAULT_TUPLE_CAP};
use digitfreq_core::schedules::Schedule;
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::config::{Experiment, Num, RunConfig};
use crate::error::CliError;

/// In-memory outputs of one run, files keyed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    pub results: Json,
}

pub fn execute(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    match cfg.experiment {
        Experiment::SllnRun => slln_run(cfg),
        Experiment::FreqCount => freq_count(cfg),
        Experiment::PairCount => pair_count(cfg),
        Experiment::DimFormula => dim_formula(cfg),
        Experiment::DimEstimate => dim_estimate(cfg),
        Experiment::MixingReport => mixing(cfg),
        Experiment::MixingaleDecay => mixingale(cfg),
        Experiment::ConstructPoint => construct_point(cfg),
        Experiment::CfBound => cf_bound(cfg),
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn word(w: &[Digit]) -> String {
    w.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

fn seed_file(seed: u64) -> String {
    format!("{seed}.csv")
}

fn tolerance(value: &Option<Num>, default: f64) -> Result<f64, CliError> {
    value.as_ref().map_or(Ok(default), Num::f64)
}

fn max_dev(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

fn slln_run(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let law = cfg.law()?.build()?;
    let schedule = cfg.schedule()?;
    let obs = cfg.observable()?;
    let n = cfg.n()?;
    schedule.ensure_valid(n)?;
    let checkpoints = cfg.checkpoints.clone().unwrap_or_else(|| default_checkpoints(n));
    let marginal = law.marginal();
    let decomposition = match cfg.components {
        Some(true) => Some(decompose(&obs, &marginal, DEFAULT_TUPLE_CAP)?),
        _ => None,
    };
    let count = schedule.max_index(n)? + 1;
    let seeds = cfg.stream_seeds();
    let traces: Vec<ConvergenceTrace> = seeds
        .par_iter()
        .map(|&seed| {
            let stream = sample_stream(&law, seed, count);
            match &decomposition {
                Some(d) => run_components(&stream, &schedule, &obs, d, n, &checkpoints),
                None => run_slln(&stream, &schedule, &obs, &marginal, n, &checkpoints),
            }
            .map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let l = schedule.arity();
    let mut header = vec!["n".to_string(), "sum".into(), "average".into(), "deviation".into()];
    if decomposition.is_some() {
        header.extend((1..=l).map(|i| format!("component_{i}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut files = BTreeMap::new();
    let mut per_seed = Vec::new();
    for (seed, t) in seeds.iter().zip(&traces) {
        let rows: Vec<Vec<String>> = t
            .checkpoints
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut row = vec![
                    c.to_string(),
                    t.sums_exact.as_ref().map_or(String::new(), |s| s[k].to_string()),
                    f(t.averages[k]),
                    f((t.averages[k] - t.target).abs()),
                ];
                if let Some(comps) = &t.components {
                    row.extend(comps[k].iter().map(|&x| f(x)));
                }
                row
            })
            .collect();
        files.insert(seed_file(seed.seed), csv_bytes(&header, &rows)?);
        per_seed.push(json!({
            "seed": seed.seed,
            "final_average": t.final_average(),
            "final_deviation": t.final_deviation(),
            "final_components": t.components.as_ref().and_then(|c| c.last().cloned()),
        }));
    }
    let devs: Vec<f64> = traces.iter().map(|t| t.final_deviation()).collect();
    let target = traces.first().map(|t| t.target).unwrap_or(f64::NAN);
    let target_exact = traces.first().and_then(|t| t.target_exact.as_ref().map(|q| q.to_string()));
    Ok(Artifacts {
        files,
        results: json!({
            "n": n,
            "schedule": schedule.to_string(),
            "target": target,
            "target_exact": target_exact,
            "mean_deviation": devs.iter().sum::<f64>() / devs.len().max(1) as f64,
            "max_deviation": max_dev(devs.iter().copied()),
            "per_seed": per_seed,
        }),
    })
}

/// `prod_i P(X = a_i)`, the independent-coordinates frequency target.
fn word_target(law: &Law, w: &[Digit]) -> f64 {
    let m = law.marginal();
    w.iter().map(|&d| m.weight(d)).product()
}

fn freq_count(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let law = cfg.law()?.build()?;
    let schedule = cfg.schedule()?;
    let n = cfg.n()?;
    let tol = tolerance(&cfg.tolerance, 0.01)?;
    schedule.ensure_valid(n)?;
    let count = schedule.max_index(n)? + 1;
    let l = schedule.arity();
    if let Some(w) = cfg.words.as_ref().and_then(|ws| ws.iter().find(|w| w.len() != l)) {
        return Err(CliError::Validation(format!("word {w:?} has length {}, schedule arity {l}", w.len())));
    }
    let seeds = cfg.stream_seeds();
    let counts: Vec<BTreeMap<Vec<Digit>, u64>> = seeds
        .par_iter()
        .map(|&seed| count_all_frequencies(&sample_stream(&law, seed, count), &schedule, n).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    // Every word of a finite alphabet is listed, including unseen ones.
    let all_words: Option<Vec<Vec<Digit>>> = law.alphabet().size().and_then(|m| {
        let total = (m as u128).checked_pow(l as u32)?;
        (total <= 1 << 16).then(|| {
            (0..total as usize)
                .map(|c| digitfreq_core::observables::decode(c, m as u64, l))
                .collect()
        })
    });
    let mut files = BTreeMap::new();
    let mut per_seed = Vec::new();
    for (seed, c) in seeds.iter().zip(&counts) {
        let words: Vec<Vec<Digit>> = match (&cfg.words, &all_words) {
            (Some(w), _) => w.clone(),
            (None, Some(all)) => all.clone(),
            (None, None) => c.keys().cloned().collect(),
        };
        let rows: Vec<Vec<String>> = words
            .iter()
            .map(|w| {
                let k = c.get(w).copied().unwrap_or(0);
                let fr = k as f64 / n as f64;
                let t = word_target(&law, w);
                vec![word(w), k.to_string(), f(fr), f(t), f((fr - t).abs())]
            })
            .collect();
        let sup = max_dev(words.iter().map(|w| {
            (c.get(w).copied().unwrap_or(0) as f64 / n as f64 - word_target(&law, w)).abs()
        }));
        files.insert(
            seed_file(seed.seed),
            csv_bytes(&["word", "count", "frequency", "target", "deviation"], &rows)?,
        );
        per_seed.push(json!({"seed": seed.seed, "sup_deviation": sup, "within_tolerance": sup <= tol}));
    }
    Ok(Artifacts {
        files,
        results: json!({"n": n, "schedule": schedule.to_string(), "tolerance": tol, "per_seed": per_seed}),
    })
}

fn pair_count(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let law = cfg.law()?.build()?;
    let schedule = cfg.schedule()?;
    let n = cfg.n()?;
    let tol = tolerance(&cfg.tolerance, 0.01)?;
    schedule.ensure_valid(n)?;
    let count = schedule.max_index(n)? + 2;
    let seeds = cfg.stream_seeds();
    let counts: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            count_all_pair_frequencies(&sample_stream(&law, seed, count), &schedule, n).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;
    // Target: prod_i P(X_0 = alpha_i, X_1 = beta_i).
    let target = |a: &[Digit], b: &[Digit]| -> f64 {
        a.iter().zip(b).map(|(&x, &y)| cylinder_mass(&law, &[x, y]).mass).product()
    };
    let mut files = BTreeMap::new();
    let mut per_seed = Vec::new();
    for (seed, c) in seeds.iter().zip(&counts) {
        let rows: Vec<Vec<String>> = c
            .iter()
            .map(|((a, b), &k)| {
                let fr = k as f64 / n as f64;
                let t = target(a, b);
                vec![word(a), word(b), k.to_string(), f(fr), f(t), f((fr - t).abs())]
            })
            .collect();
        let sup = max_dev(c.iter().map(|((a, b), &k)| (k as f64 / n as f64 - target(a, b)).abs()));
        files.insert(
            seed_file(seed.seed),
            csv_bytes(&["alpha", "beta", "count", "frequency", "target", "deviation"], &rows)?,
        );
        per_seed.push(json!({"seed": seed.seed, "sup_deviation": sup, "within_tolerance": sup <= tol}));
    }
    Ok(Artifacts {
        files,
        results: json!({"n": n, "schedule": schedule.to_string(), "tolerance": tol, "per_seed": per_seed}),
    })
}

fn dimension_of(law: &Law) -> Result<DimensionResult, CliError> {
    match law {
        Law::Bernoulli(b) => {
            let m = b.alphabet().size().ok_or_else(|| {
                CliError::Validation("dimension formulas need a finite alphabet".into())
            })?;
            Ok(hd_bernoulli(b.distribution().prefix(), m)?)
        }
        Law::Markov(mk) => Ok(hd_markov_law(mk)),
        Law::Chain(_) => Err(CliError::Validation("dimension formulas need a bernoulli or markov law".into())),
    }
}

fn dimension_json(d: &DimensionResult) -> Json {
    json!({
        "formula": d.formula,
        "inputs": d.inputs,
        "value": d.value,
        "diagnostics": {
            "base": d.base,
            "zero_terms": d.zero_terms,
            "stationary": d.stationary,
            "transition": d.transition,
        },
    })
}

fn dim_formula(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let d = dimension_of(&cfg.law()?.build()?)?;
    let formula = serde_json::to_value(d.formula).unwrap_or_default();
    let rows = vec![vec![formula.as_str().unwrap_or_default().to_string(), f(d.value)]];
    Ok(Artifacts {
        files: BTreeMap::from([("table.csv".to_string(), csv_bytes(&["formula", "value"], &rows)?)]),
        results: dimension_json(&d),
    })
}

fn decade_grid(n: u64) -> Vec<u64> {
    let mut g: Vec<u64> = std::iter::successors(Some(10u64), |&x| x.checked_mul(10))
        .take_while(|&x| x < n)
        .collect();
    g.push(n);
    g
}

fn dim_estimate(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let law = cfg.law()?.build()?;
    let expected = dimension_of(&law)?;
    let n = cfg.n()?;
    let tol = tolerance(&cfg.tolerance, 0.02)?;
    let grid = cfg.grid.clone().unwrap_or_else(|| decade_grid(n));
    let seeds = cfg.stream_seeds();
    let traces: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let stream = sample_stream(&law, seed, grid.iter().copied().max().unwrap_or(0));
            local_dimension_trace(&law, &stream, &grid).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;
    let mut files = BTreeMap::new();
    let mut per_seed = Vec::new();
    let mut within = 0;
    for (seed, t) in seeds.iter().zip(&traces) {
        let rows: Vec<Vec<String>> = t.points.iter().map(|p| vec![p.n.to_string(), f(p.value)]).collect();
        files.insert(seed_file(seed.seed), csv_bytes(&["n", "local_dimension"], &rows)?);
        let end = t.last().unwrap_or(f64::NAN);
        if (end - expected.value).abs() <= tol {
            within += 1;
        }
        per_seed.push(json!({"seed": seed.seed, "endpoint": end, "degenerate_at": t.degenerate_at}));
    }
    Ok(Artifacts {
        files,
        results: json!({
            "formula": dimension_json(&expected),
            "tolerance": tol,
            "fraction_within": within as f64 / seeds.len().max(1) as f64,
            "per_seed": per_seed,
        }),
    })
}

fn mixing(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let chain = cfg.law()?.chain()?;
    let grid = cfg.grid.clone().unwrap_or_else(|| (1..=16).collect());
    let p = cfg.p.as_ref().map_or(Ok(2.0), Num::f64)?;
    let q = cfg.q.as_ref().map_or(Ok(4.0), Num::f64)?;
    let delta = cfg.delta.as_ref().map_or(Ok(0.1), Num::f64)?;
    let report = mixing_report(&chain, &grid)?;
    let brute: Option<Vec<f64>> = match cfg.brute_force_depth {
        Some(h) => Some(
            grid.par_iter()
                .map(|&n| brute_force_psi(&chain, n, h).map_err(CliError::from))
                .collect::<Result<_, _>>()?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    for (k, c) in report.rows.iter().enumerate() {
        let b = interpolation_bounds(c, p, q)?;
        let mut row = vec![
            c.n.to_string(),
            f(c.psi),
            f(c.phi),
            f(c.rho),
            f(c.alpha),
            f(b.from_alpha),
            f(b.from_rho),
            f(b.from_phi),
            f(b.from_psi),
            f(b.min),
        ];
        if let Some(bf) = &brute {
            row.push(f(bf[k]));
        }
        rows.push(row);
    }
    let mut header = vec![
        "n", "psi", "phi", "rho", "alpha", "bound_alpha", "bound_rho", "bound_phi", "bound_psi", "bound_min",
    ];
    if brute.is_some() {
        header.push("psi_brute_force");
    }
    let arity = cfg.schedule.as_ref().map_or(2, |s| s.functions.len());
    let assumption = assumption_report(
        &chain,
        HolderConstants::for_bounded(1.0),
        arity,
        1,
        cfg.size_range.unwrap_or(10_000),
        delta,
    )?;
    Ok(Artifacts {
        files: BTreeMap::from([("table.csv".to_string(), csv_bytes(&header, &rows)?)]),
        results: json!({
            "p": p.to_string(),
            "q": q.to_string(),
            "psi_fit": report.psi_fit,
            "beta_identically_zero": report.beta_identically_zero,
            "assumption": assumption,
        }),
    })
}

fn mixingale(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let chain = cfg.law()?.chain()?;
    let obs = cfg.observable()?;
    let schedule: Schedule = cfg.schedule()?;
    let i = cfg.component.unwrap_or(obs.arity());
    let n_grid = cfg.grid.clone().unwrap_or_else(|| vec![64]);
    let m_grid = cfg.m_grid.clone().unwrap_or_else(|| (2..=32).collect());
    let c_grid = cfg.centering_grid.clone().unwrap_or_else(|| (1..=40).collect());
    let rows = mixingale_decay(&chain, &obs, &schedule, i, &m_grid, &n_grid)?;
    let centering = centering_decay(&chain, &obs, &schedule, i, &c_grid)?;
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec!["mixingale".into(), r.n.to_string(), r.m.to_string(), f(r.norm), String::new()])
        .collect();
    table.extend(centering.iter().map(|r| {
        vec![
            "centering".into(),
            r.n.to_string(),
            String::new(),
            f(r.value),
            r.exact.clone().unwrap_or_default(),
        ]
    }));
    let fits: Vec<Json> = n_grid
        .iter()
        .map(|&n| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.n == n).map(|r| (r.m as f64, r.norm)).unzip();
            json!({"n": n, "fit": log_linear_fit(&xs, &ys)})
        })
        .collect();
    let (cx, cy): (Vec<f64>, Vec<f64>) = centering.iter().map(|r| (r.n as f64, r.value)).unzip();
    Ok(Artifacts {
        files: BTreeMap::from([(
            "table.csv".to_string(),
            csv_bytes(&["kind", "n", "m", "value", "exact"], &table)?,
        )]),
        results: json!({
            "component": i,
            "schedule": schedule.to_string(),
            "mixingale_fits": fits,
            "centering_fit": log_linear_fit(&cx, &cy),
        }),
    })
}

fn construct_point(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let target = cfg.law()?.bernoulli()?;
    let law = Law::Bernoulli(target.clone());
    let mode = cfg.mode.unwrap_or(PointMode::Iid);
    let count = *cfg.require(&cfg.count, "count")?;
    let schedule = cfg.schedule.as_ref().map(|s| s.build()).transpose()?;
    let b = cfg.gzb.as_ref().map(|g| g.b.rational()).transpose()?;
    let seeds = cfg.stream_seeds();
    let mut files = BTreeMap::new();
    let mut per_seed = Vec::new();
    for seed in &seeds {
        let z = construct_up_point(&target, mode, *seed, Some(count))?;
        let digits = z.prefix(count)?;
        let mut header = vec!["index", "digit"];
        let mut rows: Vec<Vec<String>> = digits
            .iter()
            .enumerate()
            .map(|(k, d)| vec![k.to_string(), d.to_string()])
            .collect();
        let mut entry = json!({"seed": seed.seed});
        if let (Some(g), Some(b)) = (&cfg.gzb, &b) {
            let s = schedule
                .as_ref()
                .ok_or_else(|| CliError::Parse("gzb needs `schedule`".into()))?;
            let point = construct_gzb(&z, b, s, g.k_max)?;
            header.push("gzb_digit");
            for (k, row) in rows.iter_mut().enumerate() {
                row.push(point.digit_exact(k as u64)?.to_string());
            }
            entry["insertions"] = serde_json::to_value(point.insertions()).unwrap_or_default();
            if let (Some(s), Some(n)) = (&schedule, cfg.n) {
                entry["sup_deviation_gzb"] = json!(sup_deviation(&point, s, n, &law)?);
            }
        }
        if let (Some(s), Some(n)) = (&schedule, cfg.n) {
            entry["sup_deviation"] = json!(sup_deviation(&z, s, n, &law)?);
        }
        files.insert(seed_file(seed.seed), csv_bytes(&header, &rows)?);
        per_seed.push(entry);
    }
    Ok(Artifacts {
        files,
        results: json!({"mode": mode, "count": count, "per_seed": per_seed}),
    })
}

/// `sup_alpha |N_alpha(x, N)/N - prod r_{alpha_i}|` over the observed words.
fn sup_deviation<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    n: u64,
    law: &Law,
) -> Result<f64, CliError> {
    let counts = count_all_frequencies(stream, schedule, n)?;
    Ok(max_dev(
        counts
            .iter()
            .map(|(w, &k)| (k as f64 / n as f64 - word_target(law, w)).abs()),
    ))
}

fn cf_bound(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let nu = cfg.law()?.bernoulli()?;
    let n = cfg.n()?;
    let seeds = cfg.stream_seeds();
    let c = cf_bound_certificate(&nu, &seeds, n)?;
    let rows: Vec<Vec<String>> = seeds
        .iter()
        .zip(&c.per_seed)
        .map(|(s, &x)| vec![s.seed.to_string(), f(x)])
        .collect();
    Ok(Artifacts {
        files: BTreeMap::from([("table.csv".to_string(), csv_bytes(&["seed", "lyapunov"], &rows)?)]),
        results: serde_json::to_value(&c).unwrap_or_default(),
    })
}
