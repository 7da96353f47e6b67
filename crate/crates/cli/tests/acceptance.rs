//! Acceptance criteria, one line each. Run with
//! `cargo test -p reclab --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use reclab_core::algorithms::{
    grover_ksearch, run, scaling_runs, space_grid, success_probability, summarize, OracleMode,
    ScalingPoint,
};
use reclab_core::oracles::{uniform_closed_form_matrix, BotCoefficient, PhaseTable};
use reclab_core::reduction::{
    algorithm1_trials, four_wise_counts, monte_carlo_events, random_function, C1,
};
use reclab_core::rng::derived;
use reclab_core::verify::{
    bounds_assertions, indistinguishability_assertions, projection_shortcut_deviation,
    recurrence_assertions, run_suite, simulate_adversarial, simulate_grid, support_assertions,
    Assertion, GridConfig, RunRecord, Suite,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn all_pass(assertions: &[Assertion]) -> Outcome {
    let failed: Vec<&str> = assertions
        .iter()
        .filter(|a| !a.pass)
        .map(|a| a.name.as_str())
        .collect();
    let shown: Vec<String> = assertions
        .iter()
        .map(|a| format!("{}={:.3e}", a.name, a.value))
        .collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            shown.join("; ")
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed(), limit)
}

fn grid() -> Vec<RunRecord> {
    simulate_grid(&GridConfig::default()).expect("grid simulation")
}

fn ac1(records: &[RunRecord]) -> Outcome {
    all_pass(&indistinguishability_assertions(records))
}

fn ac2() -> Outcome {
    let r = run_suite(Suite::OracleEquivalence, &GridConfig::default()).expect("suite");
    let m = uniform_closed_form_matrix(&PhaseTable::new(2), 1, BotCoefficient::InverseN);
    let min_col = (0..m.dim())
        .map(|c| m.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut o = all_pass(&r.assertions);
    o.detail = format!(
        "{}; with /N at N=2 a column has squared norm {min_col}",
        o.detail
    );
    o
}

fn ac5(records: &[RunRecord]) -> Outcome {
    let mut all = records.to_vec();
    all.extend(simulate_adversarial().expect("readers"));
    all_pass(&bounds_assertions(&all))
}

fn ac6() -> Outcome {
    let f = [0u32, 0, 1, 0];
    let mut details = Vec::new();
    let mut pass = true;
    for (t, expected) in [(1usize, 1.0), (0, 0.25)] {
        let a = grover_ksearch(4, t).expect("grover");
        let r = run(&a, OracleMode::FixedInput(&f), false).expect("run");
        let s = success_probability(&r.final_state, a.relation(), OracleMode::FixedInput(&f))
            .expect("sigma");
        pass &= (s - expected).abs() <= 1e-9;
        details.push(format!("T={t}: sigma={s}"));
    }
    Outcome {
        pass,
        detail: details.join(", "),
    }
}

fn ac7() -> Outcome {
    let dev = projection_shortcut_deviation(1000, 11).expect("shortcut");
    Outcome {
        pass: dev <= 1e-9,
        detail: format!("max deviation {dev:.3e} over 1000 states"),
    }
}

fn ac8() -> Outcome {
    let mut points = Vec::new();
    for e in 10..=16 {
        let n = 1u64 << e;
        for k in [4u64, 8, 16, 32, 64] {
            points.extend(
                space_grid(n, k, 3)
                    .into_iter()
                    .map(|s| ScalingPoint { n, k, s }),
            );
        }
    }
    let runs = scaling_runs(&points, 100, 0).expect("emulation");
    let summary = summarize(&runs);
    let lo = summary
        .iter()
        .map(|p| p.ratio_min)
        .fold(f64::INFINITY, f64::min);
    let hi = summary.iter().map(|p| p.ratio_max).fold(0.0, f64::max);
    let worst = summary.iter().map(|p| p.success_rate).fold(1.0, f64::min);
    Outcome {
        pass: hi / lo <= 20.0 && worst >= 2.0 / 3.0,
        detail: format!(
            "{} points x 100 seeds: queries/(K sqrt(N/S)) in [{lo:.3}, {hi:.3}], spread {:.2}, min success {worst}",
            summary.len(),
            hi / lo
        ),
    }
}

fn ac9() -> Outcome {
    let n = 10_000u32;
    let f = random_function(10 * n as usize, n, &mut derived(0, u64::MAX));
    let t = monte_carlo_events(&f, n as u64, 100_000, 1).expect("events");
    let trials = algorithm1_trials(10 * n as usize, n, 30, 3, None).expect("trials");
    let target = (C1 * n as f64).ceil() as usize;
    let trials_ok = trials.successes * 3 >= 2 * trials.trials.len();
    let taus: Vec<u64> = trials.trials.iter().filter_map(|t| t.tau).collect();
    Outcome {
        pass: t.a.pass && t.b.pass && t.conjunction.pass && trials_ok,
        detail: format!(
            "Pr[A]={} Pr[B]={} conj={} ({} rounds); {}/30 runs reached {target} distinct (max tau {:?})",
            t.a.freq,
            t.b.freq,
            t.conjunction.freq,
            t.a.total,
            trials.successes,
            taus.iter().max()
        ),
    }
}

fn ac10() -> Outcome {
    let counts = four_wise_counts(5, 4, 4, [0, 1, 2, 3]);
    let (min, max) = (
        counts.iter().min().copied().unwrap_or(0),
        counts.iter().max().copied().unwrap_or(0),
    );
    Outcome {
        pass: counts.len() == 256 && min == max && min > 0,
        detail: format!("256 tuples, counts in [{min}, {max}]"),
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("out dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).expect("read"),
            )
        })
        .collect();
    files.sort();
    files
}

fn ac11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_reclab");
    let cases: [(&str, &[&str], &str); 8] = [
        (
            "verify",
            &["verify", "support"],
            r#"{"algorithms": 6, "max_queries": 2}"#,
        ),
        ("verify", &["verify", "hash-exactness"], "{}"),
        (
            "progress",
            &["progress"],
            r#"{"m": [2, 3], "n": [2], "t": [0, 2], "algorithms": 2}"#,
        ),
        (
            "bounds",
            &["bounds"],
            r#"{"n": [1024], "k": [2, 4], "t": [1, 4], "s_points": 4}"#,
        ),
        (
            "reduction",
            &["reduction"],
            r#"{"n": 200, "rounds": 2000, "trials": 3, "trial_rounds": 300}"#,
        ),
        (
            "emulate2",
            &["emulate2"],
            r#"{"n": [1024], "k": [4], "s_points": 2, "seeds": 5}"#,
        ),
        ("sort-instance", &["sort-instance"], r#"{"n": 16, "r": 3}"#),
        (
            "sort-instance",
            &["sort-instance"],
            r#"{"n": 8, "r": 3, "g": [1, 0, 1, 0]}"#,
        ),
    ];
    let root = tempfile::tempdir().expect("tempdir");
    let mut failures = Vec::new();
    let mut compared = 0;
    for (i, (name, args, config)) in cases.iter().enumerate() {
        let cfg = root.path().join(format!("cfg{i}.json"));
        fs::write(&cfg, config).expect("config");
        for format in ["csv", "json"] {
            let outputs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
                .map(|rep| {
                    let dir = root.path().join(format!("{i}-{format}-{rep}"));
                    let status = Command::new(bin)
                        .args(*args)
                        .arg("--config")
                        .arg(&cfg)
                        .args(["--seed", "7", "--format", format, "--out"])
                        .arg(&dir)
                        .env("RUST_LOG", "off")
                        .output()
                        .expect("spawn");
                    if !status.status.success() {
                        failures.push(format!(
                            "{name} {format} exited with {:?}",
                            status.status.code()
                        ));
                    }
                    read_all(&dir)
                })
                .collect();
            if outputs[0].is_empty() || outputs[0] != outputs[1] {
                failures.push(format!("{name} {format} outputs differ"));
            }
            compared += outputs[0].len();
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{compared} files byte-identical across repeated runs")
        } else {
            failures.join("; ")
        },
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let mut lines: Vec<(u32, &str, (Outcome, Duration, Duration))> = Vec::new();

    let start = Instant::now();
    let records = grid();
    let grid_time = start.elapsed();
    let (o, t, l) = timed(s(60), || ac1(&records));
    lines.push((1, "indistinguishability", (o, t + grid_time, l)));
    lines.push((2, "closed-form recording operators", timed(s(10), ac2)));
    lines.push((
        3,
        "support bound",
        timed(s(60), || all_pass(&support_assertions(&records))),
    ));
    lines.push((
        4,
        "progress recurrences",
        timed(s(60), || all_pass(&recurrence_assertions(&records))),
    ));
    lines.push((5, "success bounds", timed(s(60), || ac5(&records))));
    lines.push((6, "grover sanity", timed(s(5), ac6)));
    lines.push((7, "success-projection shortcut", timed(s(30), ac7)));
    lines.push((8, "multi-collision finder scaling", timed(s(300), ac8)));
    lines.push((9, "reduction monte carlo", timed(s(300), ac9)));
    lines.push((10, "hash exactness", timed(s(5), ac10)));
    lines.push((11, "determinism", timed(s(300), ac11)));

    let mut failed = 0;
    for (id, name, (o, took, limit)) in &lines {
        let pass = o.pass && took <= limit;
        failed += !pass as u32;
        println!(
            "AC{id:<2} {:4} {name} [{:.1}s / {}s] {}{}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs(),
            o.detail,
            if o.pass && took > limit {
                " (over time budget)"
            } else {
                ""
            }
        );
    }
    println!(
        "{} of {} criteria passed",
        lines.len() - failed as usize,
        lines.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
