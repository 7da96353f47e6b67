//! Invariant suites: each returns a list of named assertions with the
//! measured value and the threshold it was held to.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    classical_reader, classical_reader_success, grover_ksearch, random_algorithm, run,
    success_probability, OracleMode, QueryAlgorithm, RandomAlgorithmSpec,
};
use crate::bounds::{collision_success_bound, ksearch_success_bound, SuccessBound};
use crate::error::{Error, Result};
use crate::layout::{BasisComponent, RegisterLayout, Slot};
use crate::matrix::{CMatrix, UNITARY_TOL};
use crate::oracles::{
    apply_recording_oracle_bernoulli_closed_form, apply_recording_oracle_generic,
    apply_recording_oracle_uniform_closed_form, apply_standard_oracle, apply_translation,
    bernoulli_amplitudes, bernoulli_closed_form_column, recording_matrix,
    success_projection_recording, uniform_closed_form_matrix, BotCoefficient, PhaseTable,
    SamplingUnitary,
};
use crate::progress::{ProgressParams, ProgressTable, SLACK_TOL};
use crate::reduction::four_wise_counts;
use crate::relation::OutputRelation;
use crate::rng::derived;
use crate::state::{QueryState, DENSE_LIMIT};

pub const CLOSED_FORM_TOL: f64 = 1e-12;
pub const MODEL_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    OracleEquivalence,
    Indistinguishability,
    Support,
    Unitarity,
    Recurrences,
    BoundsDomination,
    HashExactness,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::OracleEquivalence,
        Suite::Indistinguishability,
        Suite::Support,
        Suite::Unitarity,
        Suite::Recurrences,
        Suite::BoundsDomination,
        Suite::HashExactness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::Indistinguishability => "indistinguishability",
            Suite::Support => "support",
            Suite::Unitarity => "unitarity",
            Suite::Recurrences => "recurrences",
            Suite::BoundsDomination => "bounds-domination",
            Suite::HashExactness => "hash-exactness",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite '{s}'")))
    }
}

/// `value <= threshold` (or `>=` when `at_least`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub at_least: bool,
    pub pass: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_least: false,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_least: true,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, assertions: Vec<Assertion>) -> Self {
        let pass = assertions.iter().all(|a| a.pass);
        Self {
            suite,
            assertions,
            pass,
        }
    }
}

/// Random-algorithm grid shared by the model-level suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub algorithms: usize,
    pub max_queries: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            algorithms: 60,
            max_queries: 4,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub search: bool,
    /// `max_t ‖ψ_t − T φ_t‖`; `None` when the standard model is too large.
    pub max_deviation: Option<f64>,
    pub support_violations: usize,
    pub max_recorded_excess: i64,
    pub min_recurrence_slack: f64,
    pub min_progress_bound_slack: f64,
    pub sigma_recording: f64,
    pub sigma_standard: Option<f64>,
    /// Exact value for algorithms with a known success probability.
    pub sigma_expected: Option<f64>,
    pub bound: SuccessBound,
}

fn grid_spec(i: usize, max_queries: usize) -> RandomAlgorithmSpec {
    let search = i % 2 == 1;
    let m = [2, 3, 4][(i / 2) % 3];
    let k = 1 + (i / 6) % 2;
    let t = 1 + (i / 12) % max_queries.max(1);
    // pair outputs make the K=2 collision layouts large; keep N=2 there
    let n = if search || k == 2 {
        2
    } else {
        [2, 3, 4][(i / 3) % 3]
    };
    RandomAlgorithmSpec {
        m,
        n,
        k,
        queries: t,
        search,
    }
}

fn family_for(spec: &RandomAlgorithmSpec) -> Result<SamplingUnitary> {
    if spec.search {
        SamplingUnitary::bernoulli(spec.k as u64, spec.m as u64)
    } else {
        SamplingUnitary::uniform(spec.n)
    }
}

/// Runs one algorithm in both models and collects every checked quantity.
pub fn analyze(
    label: String,
    algorithm: &QueryAlgorithm,
    family: &SamplingUnitary,
    search: bool,
    sigma_expected: Option<f64>,
) -> Result<RunRecord> {
    let layout = algorithm.layout();
    let (m, n) = (layout.m(), layout.n());
    let rel = *algorithm.relation();
    let t = algorithm.queries();
    let rec = run(algorithm, OracleMode::Recording(family), true)?;

    let mut support_violations = 0;
    let mut max_recorded_excess = i64::MIN;
    for (tt, snap) in rec.snapshots.iter().enumerate() {
        for &(key, _) in snap.entries() {
            let recorded = (0..m)
                .filter(|&x| layout.f_value(key, x) != layout.bot())
                .count() as i64;
            max_recorded_excess = max_recorded_excess.max(recorded - tt as i64);
            if recorded > tt as i64 {
                support_violations += 1;
            }
        }
    }

    let (params, bound) = if search {
        let (k, nn) = match family.kind() {
            crate::oracles::FamilyKind::Bernoulli { k, n } => (*k, *n),
            _ => (rel.k as u64, m as u64),
        };
        (
            ProgressParams::Search { k, n: nn },
            ksearch_success_bound(t as u64, rel.k as u64, nn),
        )
    } else {
        (
            ProgressParams::Collision { n: n as u64 },
            collision_success_bound(t as u64, rel.k as u64, n as u64),
        )
    };
    let k_max = params.default_k_max(t, m);
    let report = ProgressTable::from_snapshots(&rec.snapshots, params, k_max).check();

    let sigma_recording = success_projection_recording(&rec.final_state, &rel, family)?;
    let (max_deviation, sigma_standard) = if layout.size() <= DENSE_LIMIT {
        let std = run(algorithm, OracleMode::Standard(family), true)?;
        let mut dev = 0.0f64;
        for (psi, phi) in std.snapshots.iter().zip(&rec.snapshots) {
            dev = dev.max(psi.distance(&apply_translation(phi, family)?)?);
        }
        let sigma = success_probability(&std.final_state, &rel, OracleMode::Standard(family))?;
        (Some(dev), Some(sigma))
    } else {
        (None, None)
    };
    Ok(RunRecord {
        label,
        m,
        n,
        k: rel.k,
        t,
        search,
        max_deviation,
        support_violations,
        max_recorded_excess,
        min_recurrence_slack: report.min_recurrence_slack,
        min_progress_bound_slack: report.min_bound_slack,
        sigma_recording,
        sigma_standard,
        sigma_expected,
        bound,
    })
}

/// Random algorithms over `M ∈ {2,3,4}`, `N ∈ {2,3,4}` (uniform, collisions)
/// and the Bernoulli family (search), `K ∈ {1,2}`, `1 <= T <= max_queries`.
pub fn simulate_grid(cfg: &GridConfig) -> Result<Vec<RunRecord>> {
    (0..cfg.algorithms)
        .into_par_iter()
        .map(|i| {
            let spec = grid_spec(i, cfg.max_queries);
            let family = family_for(&spec)?;
            let algorithm = random_algorithm(spec, &mut derived(cfg.seed, i as u64))?;
            let kind = if spec.search { "search" } else { "collision" };
            let label = format!(
                "random#{i} {kind} M={} N={} K={} T={}",
                spec.m, spec.n, spec.k, spec.queries
            );
            analyze(label, &algorithm, &family, spec.search, None)
        })
        .collect()
}

/// Classical readers (collision, uniform) and Grover (search, Bernoulli K=1).
pub fn simulate_adversarial() -> Result<Vec<RunRecord>> {
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for m in 2..=4 {
        for n in 2..=4 {
            for r in 2..=m.min(3) {
                jobs.push((m, n, r));
            }
        }
    }
    let mut out: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(m, n, r)| {
            let a = classical_reader(m, n, r)?;
            let fam = SamplingUnitary::uniform(n)?;
            analyze(
                format!("reader M={m} N={n} r={r}"),
                &a,
                &fam,
                false,
                Some(classical_reader_success(n, r)),
            )
        })
        .collect::<Result<_>>()?;
    for m in [2usize, 3, 4] {
        for t in 0..=3 {
            let a = grover_ksearch(m, t)?;
            let fam = SamplingUnitary::bernoulli(1, m as u64)?;
            out.push(analyze(
                format!("grover M={m} T={t}"),
                &a,
                &fam,
                true,
                None,
            )?);
        }
    }
    Ok(out)
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

pub fn indistinguishability_assertions(records: &[RunRecord]) -> Vec<Assertion> {
    let compared: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.max_deviation.is_some())
        .collect();
    let uniform = compared.iter().filter(|r| !r.search).count();
    let bernoulli = compared.iter().filter(|r| r.search).count();
    vec![
        Assertion::at_least(
            "algorithms compared in both models",
            compared.len() as f64,
            50.0,
        ),
        Assertion::at_least("uniform-family algorithms compared", uniform as f64, 1.0),
        Assertion::at_least(
            "bernoulli-family algorithms compared",
            bernoulli as f64,
            1.0,
        ),
        Assertion::at_most(
            "max_t |psi_t - T phi_t|",
            max_of(compared.iter().filter_map(|r| r.max_deviation)),
            MODEL_TOL,
        ),
        Assertion::at_most(
            "max |sigma_standard - sigma_recording|",
            max_of(
                records
                    .iter()
                    .filter_map(|r| r.sigma_standard.map(|s| (s - r.sigma_recording).abs())),
            ),
            MODEL_TOL,
        ),
    ]
}

pub fn support_assertions(records: &[RunRecord]) -> Vec<Assertion> {
    vec![
        Assertion::at_most(
            "components with more than t recorded entries",
            records.iter().map(|r| r.support_violations).sum::<usize>() as f64,
            0.0,
        ),
        Assertion::at_least("runs checked", records.len() as f64, 1.0),
    ]
}

pub fn recurrence_assertions(records: &[RunRecord]) -> Vec<Assertion> {
    let min = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    vec![
        Assertion::at_least(
            "min recurrence slack (collision runs)",
            min(&|r| {
                if r.search {
                    f64::INFINITY
                } else {
                    r.min_recurrence_slack
                }
            }),
            -SLACK_TOL,
        ),
        Assertion::at_least(
            "min recurrence slack (search runs)",
            min(&|r| {
                if r.search {
                    r.min_recurrence_slack
                } else {
                    f64::INFINITY
                }
            }),
            -SLACK_TOL,
        ),
        Assertion::at_least(
            "min binomial progress-bound slack",
            min(&|r| r.min_progress_bound_slack),
            -SLACK_TOL,
        ),
    ]
}

pub fn bounds_assertions(records: &[RunRecord]) -> Vec<Assertion> {
    let mut out = vec![Assertion::at_least(
        "min (bound - sigma) over all runs",
        records
            .iter()
            .map(|r| r.bound.clamped - r.sigma_recording)
            .fold(f64::INFINITY, f64::min),
        -BOUND_TOL,
    )];
    let known: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.sigma_expected.is_some())
        .collect();
    if !known.is_empty() {
        out.push(Assertion::at_most(
            "max |sigma - exact classical value| (readers)",
            max_of(
                known
                    .iter()
                    .map(|r| (r.sigma_recording - r.sigma_expected.unwrap()).abs()),
            ),
            MODEL_TOL,
        ));
    }
    out
}

fn oracle_equivalence() -> Result<Vec<Assertion>> {
    let mut uniform_diff = 0.0f64;
    let mut bot_diff = 0.0f64;
    for n in 2..=8usize {
        let t = PhaseTable::new(n);
        let s = SamplingUnitary::uniform(n)?;
        for p in 0..n as u32 {
            let generic = recording_matrix(s.matrix(0), &t, p)?;
            uniform_diff = uniform_diff.max(generic.max_abs_diff(&uniform_closed_form_matrix(
                &t,
                p,
                BotCoefficient::InverseSqrtN,
            )));
            if p != 0 {
                for v in 0..n {
                    let expected = t.pow(p as u64 * v as u64) / (n as f64).sqrt();
                    bot_diff = bot_diff.max((generic.get(n, v) - expected).norm());
                }
            }
        }
    }
    let mut bernoulli_diff = 0.0f64;
    for n in 2..=8u64 {
        for k in 1..=n {
            let s = SamplingUnitary::bernoulli(k, n)?;
            let (a, b) = bernoulli_amplitudes(k, n);
            for p in 0..2u32 {
                let generic = recording_matrix(s.matrix(0), &PhaseTable::new(2), p)?;
                for v in 0..3u32 {
                    for (y, z) in bernoulli_closed_form_column(a, b, p, v).iter().enumerate() {
                        bernoulli_diff =
                            bernoulli_diff.max((generic.get(y, v as usize) - z).norm());
                    }
                }
            }
        }
    }
    // state level, on random components
    let l = Arc::new(RegisterLayout::new(3, 4, vec![Slot::scratch("s", 2)])?);
    let st = random_state(&l, 1000, 1);
    let generic = apply_recording_oracle_generic(&st, &SamplingUnitary::uniform(4)?)?;
    let closed = apply_recording_oracle_uniform_closed_form(&st);
    let state_uniform = max_amplitude_diff(&generic, &closed);
    let lb = Arc::new(RegisterLayout::ksearch(4, 1, &[])?);
    let sb = random_state(&lb, 1000, 2);
    let generic = apply_recording_oracle_generic(&sb, &SamplingUnitary::bernoulli(1, 4)?)?;
    let closed = apply_recording_oracle_bernoulli_closed_form(&sb, 1, 4)?;
    let state_bernoulli = max_amplitude_diff(&generic, &closed);

    let mut inv_n_min_dev = f64::INFINITY;
    for n in 2..=8usize {
        let t = PhaseTable::new(n);
        for p in 1..n as u32 {
            inv_n_min_dev = inv_n_min_dev.min(
                uniform_closed_form_matrix(&t, p, BotCoefficient::InverseN).unitarity_deviation(),
            );
        }
    }
    let shortcut = projection_shortcut_deviation(1000, 7)?;
    Ok(vec![
        Assertion::at_most(
            "uniform closed form vs matrix route (N<=8, all p, all cells)",
            uniform_diff,
            CLOSED_FORM_TOL,
        ),
        Assertion::at_most(
            "bernoulli closed form vs matrix route (K<=N<=8, p, cells)",
            bernoulli_diff,
            CLOSED_FORM_TOL,
        ),
        Assertion::at_most(
            "uniform closed form vs matrix route on 1000 random components",
            state_uniform,
            CLOSED_FORM_TOL,
        ),
        Assertion::at_most(
            "bernoulli closed form vs matrix route on 1000 random components",
            state_bernoulli,
            CLOSED_FORM_TOL,
        ),
        Assertion::at_most(
            "|<bot|R|y> - w^{py}/sqrt(N)| (matrix route)",
            bot_diff,
            CLOSED_FORM_TOL,
        ),
        Assertion::at_least(
            "unitarity deviation with w^{py}/N on the bot cell (must fail)",
            inv_n_min_dev,
            UNITARY_TOL,
        ),
        Assertion::at_most(
            "success-projection shortcut vs translated state (1000 states)",
            shortcut,
            MODEL_TOL,
        ),
    ])
}

fn max_amplitude_diff(a: &QueryState, b: &QueryState) -> f64 {
    let one = a
        .entries()
        .iter()
        .map(|&(k, x)| (x - b.amplitude_of_key(k)).norm());
    let two = b
        .entries()
        .iter()
        .map(|&(k, x)| (x - a.amplitude_of_key(k)).norm());
    max_of(one.chain(two))
}

/// Normalized state on up to `n` uniformly random basis keys.
pub fn random_state(layout: &Arc<RegisterLayout>, n: usize, seed: u64) -> QueryState {
    let mut rng = derived(seed, 0);
    let terms = (0..n)
        .map(|_| {
            (
                rng.gen_range(0..layout.size()),
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            )
        })
        .collect();
    normalized(QueryState::from_terms(Arc::clone(layout), terms).expect("keys in range"))
}

fn normalized(s: QueryState) -> QueryState {
    let norm = s.norm();
    s.scale(Complex64::new(1.0 / norm, 0.0))
}

/// Random state on a single-pair collision layout in which many components
/// differ only in the recorded values at the two output positions, so the
/// success projection has to combine them coherently.
pub fn random_grouped_state(layout: &Arc<RegisterLayout>, seed: u64) -> Result<QueryState> {
    let mut rng = derived(seed, 0);
    let (m, n) = (layout.m() as u32, layout.n() as u32);
    let mut terms = Vec::new();
    for _ in 0..4 {
        let x1 = rng.gen_range(0..m);
        let x2 = (x1 + rng.gen_range(0..m)) % m;
        let mut w: Vec<u32> = layout
            .slots()
            .iter()
            .map(|s| rng.gen_range(0..s.radix))
            .collect();
        w[0] = x1;
        w[1] = x2;
        let f: Vec<u32> = (0..m).map(|_| rng.gen_range(0..=n)).collect();
        let base = BasisComponent {
            x: rng.gen_range(0..m),
            p: rng.gen_range(0..n),
            w,
            f,
        };
        for a in 0..=n {
            for b in 0..=n {
                let mut comp = base.clone();
                comp.f[x1 as usize] = a;
                comp.f[x2 as usize] = b;
                let key = layout.encode(&comp)?;
                terms.push((
                    key,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                ));
            }
        }
    }
    Ok(normalized(QueryState::from_terms(
        Arc::clone(layout),
        terms,
    )?))
}

/// `max |shortcut - ‖Π_succ T φ‖²|` over `count` grouped states on `M = N = 4`, `K = 1`.
pub fn projection_shortcut_deviation(count: u64, seed: u64) -> Result<f64> {
    let l = Arc::new(RegisterLayout::collision(4, 4, 1, &[])?);
    let fam = SamplingUnitary::uniform(4)?;
    let rel = OutputRelation::collision(1);
    let devs: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = random_grouped_state(&l, crate::rng::mix(seed, i))?;
            let fast = success_projection_recording(&s, &rel, &fam)?;
            let slow = apply_translation(&s, &fam)?
                .project_keys(|k| rel.holds(&l, k))
                .norm_sqr();
            Ok((fast - slow).abs())
        })
        .collect::<Result<_>>()?;
    Ok(max_of(devs.into_iter()))
}

fn unitarity() -> Result<Vec<Assertion>> {
    let mut worst = 0.0f64;
    for n in 1..=8usize {
        worst = worst.max(SamplingUnitary::uniform(n)?.max_unitarity_deviation());
        worst = worst.max(CMatrix::fourier(n).unitarity_deviation());
        for k in 1..=n as u64 {
            worst = worst.max(SamplingUnitary::bernoulli(k, n as u64)?.max_unitarity_deviation());
        }
    }
    let mut recording = 0.0f64;
    for n in 1..=6usize {
        let s = SamplingUnitary::uniform(n)?;
        for p in 0..n as u32 {
            recording = recording
                .max(recording_matrix(s.matrix(0), &PhaseTable::new(n), p)?.unitarity_deviation());
        }
    }
    let mut norm_drift = 0.0f64;
    for seed in 0..10u64 {
        let l = Arc::new(RegisterLayout::new(3, 3, vec![Slot::scratch("s", 3)])?);
        let s = random_state(&l, 200, seed);
        let fam = SamplingUnitary::uniform(3)?;
        for out in [
            apply_standard_oracle(&s),
            apply_recording_oracle_generic(&s, &fam)?,
            apply_recording_oracle_uniform_closed_form(&s),
            apply_translation(&s, &fam)?,
        ] {
            norm_drift = norm_drift.max((out.norm() - 1.0).abs());
        }
    }
    Ok(vec![
        Assertion::at_most(
            "max |S^dag S - I| over sampling and Fourier matrices",
            worst,
            UNITARY_TOL,
        ),
        Assertion::at_most(
            "max |R^dag R - I| over recording matrices",
            recording,
            UNITARY_TOL,
        ),
        Assertion::at_most(
            "max norm drift of oracle applications",
            norm_drift,
            MODEL_TOL,
        ),
    ])
}

fn hash_exactness() -> Vec<Assertion> {
    let counts = four_wise_counts(5, 4, 4, [0, 1, 2, 3]);
    let max = *counts.iter().max().unwrap_or(&0);
    let min = *counts.iter().min().unwrap_or(&0);
    vec![
        Assertion::at_most(
            "max - min tuple count (q=5, d=4, R=4)",
            (max - min) as f64,
            0.0,
        ),
        Assertion::at_least(
            "tuples observed",
            counts.iter().filter(|&&c| c > 0).count() as f64,
            256.0,
        ),
    ]
}

pub fn run_suite(suite: Suite, grid: &GridConfig) -> Result<SuiteReport> {
    let assertions = match suite {
        Suite::OracleEquivalence => oracle_equivalence()?,
        Suite::Unitarity => unitarity()?,
        Suite::HashExactness => hash_exactness(),
        Suite::Indistinguishability => indistinguishability_assertions(&simulate_grid(grid)?),
        Suite::Support => support_assertions(&simulate_grid(grid)?),
        Suite::Recurrences => recurrence_assertions(&simulate_grid(grid)?),
        Suite::BoundsDomination => {
            let mut records = simulate_grid(grid)?;
            records.extend(simulate_adversarial()?);
            bounds_assertions(&records)
        }
    };
    Ok(SuiteReport::new(suite, assertions))
}

/// Relation helper used by reports.
pub fn relation_label(r: &OutputRelation) -> String {
    format!("{:?}-{}", r.kind, r.k)
}
