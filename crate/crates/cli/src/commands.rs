use std::path::PathBuf;

use anyhow::Result;
use rayon::prelude::*;
use reclab_core::algorithms::{
    normalized_queries, random_algorithm, run, scaling_runs, space_grid, summarize, OracleMode,
    PointSummary, RandomAlgorithmSpec, ScalingPoint,
};
use reclab_core::bounds::{
    build_sorting_instance, collision_success_bound, ksearch_success_bound, tradeoff_point,
    CurveKind, SuccessBound,
};
use reclab_core::progress::{ProgressParams, ProgressTable};
use reclab_core::reduction::{
    algorithm1_trials, monte_carlo_events, multicollision_profile, random_function, run_algorithm1,
    EventStat,
};
use reclab_core::rng::{derived, mix};
use reclab_core::verify::{run_suite, GridConfig, Suite};
use reclab_core::SamplingUnitary;
use serde::Serialize;

use crate::config::{
    BoundsConfig, EmulateConfig, Family, ProgressConfig, ReductionConfig, SortConfig, VerifyConfig,
};
use crate::output::Report;

pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

/// What `verify` hashes: the suite together with its grid.
#[derive(Serialize)]
pub struct VerifyScope<'a> {
    pub suite: Suite,
    #[serde(flatten)]
    pub grid: &'a VerifyConfig,
}

pub fn verify(scope: &VerifyScope, mut out: Report) -> Result<Outcome> {
    let cfg = scope.grid;
    let grid = GridConfig {
        algorithms: cfg.algorithms,
        max_queries: cfg.max_queries,
        seed: cfg.seed,
    };
    let r = run_suite(scope.suite, &grid)?;
    for a in &r.assertions {
        let rel = if a.at_least { ">=" } else { "<=" };
        println!(
            "{} {}: {:.3e} {rel} {:.1e}",
            if a.pass { "PASS" } else { "FAIL" },
            a.name,
            a.value,
            a.threshold
        );
    }
    out.table("assertions", &r.assertions)?;
    let files = out.finish(r.pass, serde_json::json!({ "suite": scope.suite }))?;
    Ok(Outcome {
        pass: r.pass,
        files,
    })
}

#[derive(Serialize)]
struct ProgressRow {
    point: usize,
    algorithm: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k_rel: usize,
    #[serde(rename = "T")]
    big_t: usize,
    t: usize,
    k: usize,
    q: f64,
    bound: f64,
    slack: f64,
}

#[derive(Serialize)]
struct ProgressSummary {
    runs: usize,
    min_recurrence_slack: f64,
    min_bound_slack: f64,
}

/// `(point index, algorithm index, (M, N, K, T))`.
type ProgressJob = (usize, usize, (usize, usize, usize, usize));

pub fn progress(cfg: &ProgressConfig, mut out: Report) -> Result<Outcome> {
    let jobs: Vec<ProgressJob> = cfg
        .points()
        .into_iter()
        .enumerate()
        .flat_map(|(i, p)| (0..cfg.algorithms).map(move |a| (i, a, p)))
        .collect();
    let search = cfg.family == Family::Bernoulli;
    let tables: Vec<(ProgressTable, usize)> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(_, _, (m, n, k, t)))| {
            let spec = RandomAlgorithmSpec {
                m,
                n,
                k,
                queries: t,
                search,
            };
            let (family, params) = if search {
                (
                    SamplingUnitary::bernoulli(k as u64, m as u64)?,
                    ProgressParams::Search {
                        k: k as u64,
                        n: m as u64,
                    },
                )
            } else {
                (
                    SamplingUnitary::uniform(n)?,
                    ProgressParams::Collision { n: n as u64 },
                )
            };
            let alg = random_algorithm(spec, &mut derived(cfg.seed, idx as u64))?;
            let rec = run(&alg, OracleMode::Recording(&family), true)?;
            let k_max = params.default_k_max(t, m);
            Ok((
                ProgressTable::from_snapshots(&rec.snapshots, params, k_max),
                t,
            ))
        })
        .collect::<reclab_core::Result<_>>()?;

    let mut rows = Vec::new();
    let (mut min_rec, mut min_bound) = (f64::INFINITY, f64::INFINITY);
    let mut pass = true;
    for (&(point, algorithm, (m, n, k_rel, big_t)), (table, _)) in jobs.iter().zip(&tables) {
        let check = table.check();
        pass &= check.passes();
        min_rec = min_rec.min(check.min_recurrence_slack);
        min_bound = min_bound.min(check.min_bound_slack);
        rows.extend(check.cells.iter().map(|c| ProgressRow {
            point,
            algorithm,
            m,
            n,
            k_rel,
            big_t,
            t: c.t,
            k: c.k,
            q: c.q,
            bound: c.bound,
            slack: c.slack(),
        }));
    }
    out.table("cells", &rows)?;
    let files = out.finish(
        pass,
        ProgressSummary {
            runs: jobs.len(),
            min_recurrence_slack: min_rec,
            min_bound_slack: min_bound,
        },
    )?;
    Ok(Outcome { pass, files })
}

#[derive(Serialize)]
struct CurveRow {
    curve: CurveKind,
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "K")]
    k: u64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "T")]
    t: f64,
}

#[derive(Serialize)]
struct SuccessRow {
    relation: &'static str,
    #[serde(rename = "T")]
    t: u64,
    #[serde(rename = "K")]
    k: u64,
    #[serde(rename = "N")]
    n: u64,
    k_star: u64,
    u: f64,
    v: f64,
    raw: f64,
    clamped: f64,
    in_range: bool,
}

#[derive(Serialize)]
struct Meeting {
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "K")]
    k: u64,
    #[serde(rename = "S")]
    s: f64,
    lower_over_upper: f64,
}

/// Space grid: geometric from `max(1, log2 N)` to `N`, plus `K^{2/3} N^{1/3}`.
fn curve_space_grid(n: u64, k: u64, points: usize) -> Vec<f64> {
    let nf = n as f64;
    let lo = nf.log2().max(1.0);
    let mut s: Vec<f64> = (0..points)
        .map(|i| lo * (nf / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    s.push((k as f64).powf(2.0 / 3.0) * nf.cbrt());
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

pub fn bounds(cfg: &BoundsConfig, mut out: Report) -> Result<Outcome> {
    let mut curves = Vec::new();
    let mut meetings = Vec::new();
    let mut monotone_curves = true;
    for &n in &cfg.n {
        for &k in &cfg.k {
            let grid = curve_space_grid(n, k, cfg.s_points);
            for &kind in &cfg.curves {
                let mut prev = f64::INFINITY;
                for &s in &grid {
                    let t = tradeoff_point(kind, n as f64, k as f64, s, &cfg.constants);
                    monotone_curves &= t <= prev * (1.0 + 1e-12);
                    prev = t;
                    curves.push(CurveRow {
                        curve: kind,
                        n,
                        k,
                        s,
                        t,
                    });
                }
            }
            let s = (k as f64).powf(2.0 / 3.0) * (n as f64).cbrt();
            meetings.push(Meeting {
                n,
                k,
                s,
                lower_over_upper: tradeoff_point(
                    CurveKind::CollisionLower,
                    n as f64,
                    k as f64,
                    s,
                    &cfg.constants,
                ) / tradeoff_point(
                    CurveKind::CollisionUpper,
                    n as f64,
                    k as f64,
                    s,
                    &cfg.constants,
                ),
            });
        }
    }
    let mut success = Vec::new();
    let mut monotone_success = true;
    for &n in &cfg.n {
        for &k in &cfg.k {
            for (relation, f) in [
                (
                    "collision",
                    collision_success_bound as fn(u64, u64, u64) -> SuccessBound,
                ),
                ("k-search", ksearch_success_bound),
            ] {
                let mut ts = cfg.t.clone();
                ts.sort_unstable();
                let mut prev = 0.0;
                for t in ts {
                    let b = f(t, k, n);
                    monotone_success &= b.raw >= prev;
                    prev = b.raw;
                    success.push(SuccessRow {
                        relation,
                        t,
                        k,
                        n,
                        k_star: b.k_star,
                        u: b.u,
                        v: b.v,
                        raw: b.raw,
                        clamped: b.clamped,
                        in_range: b.in_range,
                    });
                }
            }
        }
    }
    out.table("curves", &curves)?;
    out.table("success", &success)?;
    let pass = monotone_curves && monotone_success;
    let files = out.finish(
        pass,
        serde_json::json!({
            "constants": cfg.constants,
            "curves_non_increasing_in_s": monotone_curves,
            "success_bounds_non_decreasing_in_t": monotone_success,
            "meeting_points": meetings,
        }),
    )?;
    Ok(Outcome { pass, files })
}

#[derive(Serialize)]
struct EventRow<'a> {
    event: &'a str,
    count: u64,
    total: u64,
    freq: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    bound: f64,
    pass: bool,
}

impl<'a> EventRow<'a> {
    fn new(event: &'a str, s: &EventStat) -> Self {
        Self {
            event,
            count: s.count,
            total: s.total,
            freq: s.freq,
            wilson_lo: s.wilson_lo,
            wilson_hi: s.wilson_hi,
            bound: s.bound,
            pass: s.pass,
        }
    }
}

#[derive(Serialize)]
struct CollisionRow {
    a: u64,
    b: u64,
    f_value: u32,
}

pub fn reduction(cfg: &ReductionConfig, mut out: Report) -> Result<Outcome> {
    let n = cfg.n;
    let d = (cfg.d_factor as usize) * n as usize;
    let f = random_function(d, n, &mut derived(cfg.seed, u64::MAX));
    let profile = multicollision_profile(&f);
    let tally = monte_carlo_events(&f, n as u64, cfg.rounds, mix(cfg.seed, 1))?;
    let single = run_algorithm1(&f, n as u64, mix(cfg.seed, 2), cfg.trial_rounds)?;
    let trials = algorithm1_trials(d, n, cfg.trials, mix(cfg.seed, 3), cfg.trial_rounds)?;

    let events = [
        ("A", tally.a),
        ("B", tally.b),
        ("C", tally.c),
        ("D", tally.d),
        ("conjunction", tally.conjunction),
    ];
    let mut pairs: Vec<(u64, u64)> = single.outputs.clone();
    pairs.sort_unstable();
    pairs.dedup();
    let collisions: Vec<CollisionRow> = pairs
        .iter()
        .map(|&(a, b)| CollisionRow {
            a,
            b,
            f_value: f[a as usize],
        })
        .collect();
    out.table(
        "events",
        &events
            .iter()
            .map(|(event, stat)| EventRow::new(event, stat))
            .collect::<Vec<_>>(),
    )?;
    out.table("collisions", &collisions)?;
    let trials_pass = trials.success_rate >= 2.0 / 3.0;
    let pass = tally.passes() && trials_pass;
    for (name, s) in &events {
        println!(
            "{name}: freq {} (bound {}) {}",
            s.freq,
            s.bound,
            if s.pass { "pass" } else { "FAIL" }
        );
    }
    println!(
        "full runs: {}/{} reached {} distinct collisions",
        trials.successes,
        trials.trials.len(),
        trials.target
    );
    let files = out.finish(
        pass,
        serde_json::json!({
            "events": events.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
            "epoch_length": tally.epoch_length,
            "note": tally.note,
            "input_profile": profile,
            "single_run": { "rounds": single.rounds, "distinct": single.distinct, "tau": single.tau },
            "trials": trials,
            "trials_pass": trials_pass,
        }),
    )?;
    Ok(Outcome { pass, files })
}

#[derive(Serialize)]
struct EmulationRow {
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "K")]
    k: u64,
    #[serde(rename = "S")]
    s: u64,
    seed: u64,
    queries: u64,
    collisions_found: usize,
}

#[derive(Serialize)]
pub struct ScalingSummary {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub spread: f64,
    pub min_success_rate: f64,
    pub points: usize,
}

pub fn scaling_summary(points: &[PointSummary]) -> ScalingSummary {
    let ratio_min = points
        .iter()
        .map(|p| p.ratio_min)
        .fold(f64::INFINITY, f64::min);
    let ratio_max = points.iter().map(|p| p.ratio_max).fold(0.0, f64::max);
    ScalingSummary {
        ratio_min,
        ratio_max,
        spread: ratio_max / ratio_min,
        min_success_rate: points.iter().map(|p| p.success_rate).fold(1.0, f64::min),
        points: points.len(),
    }
}

pub fn emulate2(cfg: &EmulateConfig, mut out: Report) -> Result<Outcome> {
    let mut points = Vec::new();
    for &n in &cfg.n {
        for &k in &cfg.k {
            points.extend(
                space_grid(n, k, cfg.s_points)
                    .into_iter()
                    .map(|s| ScalingPoint { n, k, s }),
            );
        }
    }
    let runs = scaling_runs(&points, cfg.seeds, cfg.seed)?;
    debug_assert!(runs.iter().all(|e| normalized_queries(e).is_finite()));
    let rows: Vec<EmulationRow> = runs
        .iter()
        .map(|e| EmulationRow {
            n: e.n,
            k: e.k,
            s: e.s,
            seed: e.seed,
            queries: e.queries,
            collisions_found: e.collisions.len(),
        })
        .collect();
    let per_point = summarize(&runs);
    let summary = scaling_summary(&per_point);
    let pass =
        summary.spread <= cfg.max_ratio_spread && summary.min_success_rate >= cfg.min_success_rate;
    println!(
        "normalized queries in [{}, {}] (spread {}), min success rate {}",
        summary.ratio_min, summary.ratio_max, summary.spread, summary.min_success_rate
    );
    out.table("runs", &rows)?;
    out.table("points", &per_point)?;
    let files = out.finish(pass, summary)?;
    Ok(Outcome { pass, files })
}

#[derive(Serialize)]
struct InstanceRow {
    x: usize,
    f: u8,
}

pub fn sort_instance(cfg: &SortConfig, mut out: Report) -> Result<Outcome> {
    use rand::Rng;
    let g = match &cfg.g {
        Some(g) => g.clone(),
        None => {
            let mut rng = derived(cfg.seed, 0);
            (0..cfg.n / 2).map(|_| rng.gen_range(0..2u8)).collect()
        }
    };
    let f = build_sorting_instance(&g, cfg.r, cfg.n)?;
    let rows: Vec<InstanceRow> = f
        .iter()
        .enumerate()
        .map(|(i, &f)| InstanceRow { x: i + 1, f })
        .collect();
    out.table("instance", &rows)?;
    let files = out.finish(
        true,
        serde_json::json!({ "N": cfg.n, "r": cfg.r, "g": g, "ones": f.iter().filter(|&&v| v == 1).count() }),
    )?;
    Ok(Outcome { pass: true, files })
}
