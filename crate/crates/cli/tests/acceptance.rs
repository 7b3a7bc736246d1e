//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints a PASS/FAIL line; the process fails if any criterion fails.
//!
//! `cargo test --test acceptance -- <substring>` runs the matching criteria only.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use duqbench::analysis::{
    cluster_performance, cumulative_ranks, dominated_flags, pareto_frontier, render, Analysis, AnalysisConfig,
    ClusterAxis,
};
use duqbench::design::DesignType;
use duqbench::emulators::{sizes, EmulatorSpec, BUILTIN_METHODS};
use duqbench::harness::{run_sim_study, FailureType, ResultRow, ResultTable, SimStudy, TableKind};
use duqbench::metrics::{crps, relative_scores, summary_metrics, CrpsVariant, PredictiveEnsemble, ScoreConfig};
use duqbench::rng::SplitMix64;
use duqbench::seeding::Scenario;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= budget, || format!("took {took:.1?}, budget {budget:?}"))
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn specs(methods: &[&str]) -> Vec<EmulatorSpec> {
    methods.iter().map(|m| EmulatorSpec::new(*m)).collect()
}

fn baseline_crps_anchor() -> Result<String, String> {
    let start = Instant::now();
    let (n, m) = (10_000, 500);
    let mut rng = SplitMix64::new(20_240_601);
    let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let draws = DMatrix::from_fn(m, n, |_, _| rng.normal());
    let ens = PredictiveEnsemble::new(draws).map_err(|e| e.to_string())?;
    let cfg = ScoreConfig {
        crps_variant: CrpsVariant::Fair,
        ..ScoreConfig::default()
    };
    let mean = summary_metrics(&y, &ens, &cfg).map_err(|e| e.to_string())?.crps_mean;
    let target = std::f64::consts::PI.sqrt().recip();
    ensure((mean - target).abs() <= 0.01, || format!("mean fair CRPS {mean:.4}, expected {target:.4} +/- 0.01"))?;
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("mean fair CRPS {mean:.4} vs {target:.4}"))
}

fn literal_crps(y: f64, d: &[f64], pair_const: f64) -> f64 {
    let m = d.len() as f64;
    let first = d.iter().map(|v| (v - y).abs()).sum::<f64>() / m;
    let mut pairs = 0.0;
    for j in 0..d.len() {
        for k in j + 1..d.len() {
            pairs += (d[j] - d[k]).abs();
        }
    }
    first - pair_const * pairs
}

fn crps_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = SplitMix64::new(77);
    let mut worst = 0.0f64;
    let mut worst_prop = 0.0f64;
    for case in 0..1000 {
        let m = 2 + rng.below(199) as usize;
        let scale = 10f64.powf(rng.uniform() * 2.0 - 1.0);
        let d: Vec<f64> = (0..m)
            .map(|i| if case % 7 == 0 && i % 3 == 0 { 0.25 } else { scale * rng.normal() })
            .collect();
        let y = scale * 2.0 * rng.normal();
        let mf = m as f64;
        for (variant, c) in [
            (CrpsVariant::Printed, 1.0 / (2.0 * mf * (mf - 1.0))),
            (CrpsVariant::Fair, 1.0 / (mf * (mf - 1.0))),
        ] {
            let fast = crps(variant, y, &d).map_err(|e| e.to_string())?;
            worst = worst.max((fast - literal_crps(y, &d, c)).abs());
            let shift = rng.normal() * 3.0;
            let shifted: Vec<f64> = d.iter().map(|v| v + shift).collect();
            let a = rng.normal() * 2.0;
            let scaled: Vec<f64> = d.iter().map(|v| v * a).collect();
            let t = crps(variant, y + shift, &shifted).map_err(|e| e.to_string())?;
            let h = crps(variant, y * a, &scaled).map_err(|e| e.to_string())?;
            worst_prop = worst_prop.max((t - fast).abs()).max((h - a.abs() * fast).abs());
        }
    }
    ensure(worst < 1e-12, || format!("fast path differs from literal sum by {worst:e}"))?;
    ensure(worst_prop < 1e-9, || format!("translation/homogeneity violated by {worst_prop:e}"))?;
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("max |fast - literal| = {worst:.1e}; invariance residual {worst_prop:.1e}"))
}

fn listing_study(fnames: &[&str], reps: Vec<u32>, workers: usize) -> SimStudy {
    SimStudy {
        specs: specs(&["baseline_t", "blm", "local_nn_gp"]),
        fnames: fnames.iter().map(|s| s.to_string()).collect(),
        n_train: vec![1000],
        nsr: vec![0.0],
        replications: reps,
        workers,
        ..SimStudy::default()
    }
}

fn reproducibility() -> Result<String, String> {
    let start = Instant::now();
    let first = run_sim_study(&listing_study(&["borehole", "ishigami"], (1..=10).collect(), workers()))
        .map_err(|e| e.to_string())?;
    let second = run_sim_study(&listing_study(&["ishigami"], vec![1, 7], 1)).map_err(|e| e.to_string())?;
    let strip = |r: &ResultRow| {
        let mut r = r.clone();
        r.t_fit = 0.0;
        r.t_pred = 0.0;
        r.t_tot = 0.0;
        r
    };
    let shared: Vec<ResultRow> = first
        .rows()
        .iter()
        .filter(|r| r.problem() == "ishigami" && matches!(r.scenario, Scenario::Synthetic { replication: 1 | 7, .. }))
        .map(strip)
        .collect();
    let again: Vec<ResultRow> = second.rows().iter().map(strip).collect();
    ensure(shared.len() == 6 && again.len() == 6, || {
        format!("expected 6 shared rows, got {} and {}", shared.len(), again.len())
    })?;
    for (a, b) in shared.iter().zip(&again) {
        let same = a.method == b.method
            && a.scenario == b.scenario
            && a.rmse.to_bits() == b.rmse.to_bits()
            && a.fvu.to_bits() == b.fvu.to_bits()
            && a.crps.to_bits() == b.crps.to_bits()
            && a.failure_type == b.failure_type
            && a.extras.iter().zip(&b.extras).all(|(x, y)| x.0 == y.0 && x.1.to_bits() == y.1.to_bits());
        ensure(same, || format!("row differs: {a:?} vs {b:?}"))?;
    }
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("{} rows in the first study, 6 shared rows bit-identical", first.len()))
}

fn scheduling_independence() -> Result<String, String> {
    let start = Instant::now();
    let study = |w| SimStudy {
        specs: specs(&BUILTIN_METHODS),
        fnames: vec!["friedman".into(), "otl_circuit".into()],
        n_train: vec![200],
        replications: vec![1, 2, 3],
        workers: w,
        ..SimStudy::default()
    };
    let one = run_sim_study(&study(1)).map_err(|e| e.to_string())?.without_timing();
    let eight = run_sim_study(&study(8)).map_err(|e| e.to_string())?.without_timing();
    ensure(one.len() == 42, || format!("expected 42 rows, got {}", one.len()))?;
    let (a, b) = (
        one.to_csv_string().map_err(|e| e.to_string())?,
        eight.to_csv_string().map_err(|e| e.to_string())?,
    );
    ensure(a == b, || "workers=1 and workers=8 tables differ".into())?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("{} rows identical for workers 1 and 8", one.len()))
}

fn sanity_ladder() -> Result<String, String> {
    let start = Instant::now();
    let study = SimStudy {
        specs: specs(&["gp", "rffgp", "baseline_t"]),
        fnames: vec!["borehole".into()],
        n_train: vec![500],
        replications: (1..=5).collect(),
        workers: workers(),
        ..SimStudy::default()
    };
    let t = run_sim_study(&study).map_err(|e| e.to_string())?;
    let mean = |m: &str| {
        let v: Vec<f64> = t.rows().iter().filter(|r| r.method == m).map(|r| r.crps).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (gp, rff, base) = (mean("gp"), mean("rffgp"), mean("baseline_t"));
    let summary = format!("gp {gp:.4}, rffgp {rff:.4}, baseline_t {base:.4}");
    ensure(gp < rff && rff < base, || format!("ordering violated: {summary}"))?;
    ensure(gp <= 0.2 * base, || format!("gp above 0.2 x baseline: {summary}"))?;
    ensure((base - 0.56).abs() <= 0.1, || format!("baseline outside 0.56 +/- 0.1: {summary}"))?;
    within_budget(start, Duration::from_secs(600))?;
    Ok(summary)
}

fn size_formulas() -> Result<String, String> {
    // floor(sqrt n) = 10, 22, 31, 70
    let expected = [
        (100, 30, 99, 20, 5),
        (500, 30, 100, 44, 11),
        (1000, 31, 100, 62, 15),
        (5000, 70, 140, 140, 35),
    ];
    for (n, nn, sod, rff, bcm) in expected {
        let got = (
            sizes::local_neighbors(n),
            sizes::sod_subset(n),
            sizes::rff_features(n),
            sizes::bcm_partitions(n),
        );
        ensure(got == (nn, sod, rff, bcm), || format!("n={n}: got {got:?}, expected {:?}", (nn, sod, rff, bcm)))?;
    }
    Ok("neighbors/subset/features/partitions match for n in {100, 500, 1000, 5000}".into())
}

fn random_table(rng: &mut SplitMix64, methods: usize, scenarios: u32) -> ResultTable {
    let mut t = ResultTable::new(TableKind::Synthetic, vec!["CRPS_median".into()]);
    for rep in 1..=scenarios {
        for m in 0..methods {
            let crps = if rng.uniform() < 0.1 { 0.0 } else { rng.uniform().powi(3) * 2.0 };
            let t_tot = 10f64.powf(rng.uniform() * 4.0 - 3.0);
            t.push(ResultRow {
                method: format!("m{m}"),
                scenario: Scenario::synthetic("f", 100, 0.0, DesignType::Lhs, rep),
                rmse: crps,
                fvu: crps,
                crps,
                t_fit: t_tot / 2.0,
                t_pred: t_tot / 4.0,
                t_tot,
                failure_type: FailureType::None,
                extras: BTreeMap::from([("CRPS_median".to_string(), crps)]),
            })
            .expect("synthetic rows");
        }
    }
    t
}

fn analysis_oracles() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = SplitMix64::new(5);
    let cfg = ScoreConfig::default();
    for trial in 0..100 {
        let k = 2 + rng.below(9) as usize;
        let reps = 1 + rng.below(12) as u32;
        let t = random_table(&mut rng, k, reps);
        let pts = pareto_frontier(&t, &cfg).map_err(|e| e.to_string())?;
        let coords: Vec<(f64, f64)> = pts.iter().map(|p| (p.avg_rel_crps, p.avg_rel_runtime)).collect();
        for (i, p) in pts.iter().enumerate() {
            let brute = coords
                .iter()
                .any(|o| o.0 <= coords[i].0 && o.1 <= coords[i].1 && (o.0 < coords[i].0 || o.1 < coords[i].1));
            ensure(p.dominated == brute, || format!("trial {trial}: dominance of {} disagrees", p.method))?;
        }
        ensure(dominated_flags(&coords) == pts.iter().map(|p| p.dominated).collect::<Vec<_>>(), || {
            format!("trial {trial}: flags differ")
        })?;
        for c in cumulative_ranks(&t).map_err(|e| e.to_string())? {
            ensure(c.proportions.windows(2).all(|w| w[0] <= w[1]), || format!("trial {trial}: non-monotone curve"))?;
            ensure(*c.proportions.last().unwrap() == 1.0, || format!("trial {trial}: terminal value not 1"))?;
        }
        for rep in 1..=3u32 {
            let scores: BTreeMap<String, f64> = t
                .rows()
                .iter()
                .filter(|r| matches!(r.scenario, Scenario::Synthetic { replication, .. } if replication == rep))
                .map(|r| (r.method.clone(), r.crps))
                .collect();
            if scores.is_empty() {
                continue;
            }
            let rel = relative_scores(&scores, &cfg).map_err(|e| e.to_string())?;
            let min = rel.values().copied().fold(f64::INFINITY, f64::min);
            ensure(min == 1.0, || format!("trial {trial}: minimum relative CRPS {min}"))?;
            ensure(rel.values().all(|v| *v <= 100.0), || format!("trial {trial}: relative CRPS above cap"))?;
        }
    }
    ensure(cfg.epsilon == 0.001 && cfg.cap == 100.0, || "default epsilon/cap changed".into())?;
    within_budget(start, Duration::from_secs(60))?;
    Ok("100 random tables: frontier matches brute force, curves monotone to 1, relative CRPS in [1, 100]".into())
}

fn clustering_duplicate() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = SplitMix64::new(8);
    let base = random_table(&mut rng, 7, 40);
    let mut dup = base.clone();
    for r in base.rows().iter().filter(|r| r.method == "m3") {
        let mut c = r.clone();
        c.method = "m3_copy".into();
        dup.push(c).map_err(|e| e.to_string())?;
    }
    let c = cluster_performance(&dup, ClusterAxis::Methods).map_err(|e| e.to_string())?;
    let i = c.items.iter().position(|m| m == "m3").ok_or("m3 missing")?;
    let j = c.items.iter().position(|m| m == "m3_copy").ok_or("copy missing")?;
    let gap = ((c.coords[i][0] - c.coords[j][0]).powi(2) + (c.coords[i][1] - c.coords[j][1]).powi(2)).sqrt();
    ensure(gap < 1e-8, || format!("embedded distance {gap:e}"))?;
    ensure(c.labels[i] == c.labels[j], || format!("labels differ: {} vs {}", c.labels[i], c.labels[j]))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("pair distance {gap:.1e}, shared label {}", c.labels[i]))
}

fn fallback_totality() -> Result<String, String> {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_duqbench-echo-emulator");
    let ext = |args: &[&str], label: &str| {
        let mut cmd = vec![bin.to_string()];
        cmd.extend(args.iter().map(|s| s.to_string()));
        EmulatorSpec::external(cmd).with_label(label)
    };
    let study = SimStudy {
        specs: vec![
            EmulatorSpec::new("baseline_t"),
            ext(&[], "echo"),
            ext(&["--fail-at", "fit"], "fail_fit"),
            ext(&["--fail-at", "predict"], "fail_pred"),
            ext(&["--crash-at", "fit"], "crash_fit"),
            ext(&["--sleep-at", "fit", "--sleep-secs", "10"], "slow_fit").with_hyper("timeout", 0.5),
            ext(&["--sleep-at", "predict", "--sleep-secs", "10"], "slow_pred").with_hyper("timeout", 0.5),
        ],
        fnames: vec!["ishigami".into()],
        n_train: vec![50],
        replications: vec![1, 2],
        m: 200,
        n_test: 200,
        timeout: Some(30.0),
        ..SimStudy::default()
    };
    let t = run_sim_study(&study).map_err(|e| e.to_string())?;
    ensure(t.len() == 14, || format!("expected 14 rows, got {}", t.len()))?;
    let expected = [
        ("external_echo", FailureType::None),
        ("external_fail_fit", FailureType::Fit),
        ("external_fail_pred", FailureType::Pred),
        ("external_crash_fit", FailureType::Fit),
        ("external_slow_fit", FailureType::Fit),
        ("external_slow_pred", FailureType::Pred),
    ];
    for chunk in t.rows().chunks(7) {
        let base = &chunk[0];
        for (row, (label, ft)) in chunk[1..].iter().zip(expected) {
            ensure(row.method == label && row.failure_type == ft, || {
                format!("{}: failure_type {} (expected {label} / {ft})", row.method, row.failure_type)
            })?;
            if ft != FailureType::None {
                ensure(
                    row.crps == base.crps && row.rmse == base.rmse && row.extras == base.extras,
                    || format!("{} metrics differ from the baseline row", row.method),
                )?;
            }
            ensure(row.crps.is_finite() && row.rmse.is_finite(), || format!("{} metrics missing", row.method))?;
        }
    }
    within_budget(start, Duration::from_secs(60))?;
    Ok("fit/pred/crash/timeout failures recorded with baseline metrics".into())
}

fn desk_bakeoff() -> Result<String, String> {
    let start = Instant::now();
    let fnames = [
        "borehole",
        "ishigami",
        "friedman",
        "piston",
        "otl_circuit",
        "dette_pepelyshev",
        "lim_polynomial",
        "step_2d",
    ];
    let study = SimStudy {
        specs: specs(&BUILTIN_METHODS),
        fnames: fnames.iter().map(|s| s.to_string()).collect(),
        n_train: vec![500],
        nsr: vec![0.0, 0.1],
        replications: (1..=5).collect(),
        workers: workers(),
        ..SimStudy::default()
    };
    let t = run_sim_study(&study).map_err(|e| e.to_string())?;
    ensure(t.len() == 7 * 8 * 2 * 5, || format!("expected 560 rows, got {}", t.len()))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let written = render(&t, &Analysis::ALL, dir.path(), &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    for name in ["rank", "heatmap", "pareto", "clusters"] {
        for ext in ["csv", "svg"] {
            let p = dir.path().join(format!("{name}.{ext}"));
            let len = std::fs::metadata(&p).map(|m| m.len()).unwrap_or(0);
            ensure(len > 0, || format!("{} missing or empty", p.display()))?;
        }
    }
    let failures = t.rows().iter().filter(|r| r.failure_type != FailureType::None).count();
    let took = start.elapsed();
    within_budget(start, Duration::from_secs(20 * 60))?;
    let curves = cumulative_ranks(&t).map_err(|e| e.to_string())?;
    let order: Vec<String> = curves.iter().map(|c| format!("{} {:.2}", c.method, c.auc)).collect();
    Ok(format!(
        "{} rows, {} artifacts, {failures} fallbacks, {:.0} s on {} worker(s); rank AUC: {}",
        t.len(),
        written.len(),
        took.as_secs_f64(),
        workers(),
        order.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("baseline CRPS anchor", baseline_crps_anchor),
        ("CRPS oracle equivalence", crps_oracle_equivalence),
        ("reproducibility across studies", reproducibility),
        ("scheduling independence", scheduling_independence),
        ("emulator sanity ladder", sanity_ladder),
        ("size formulas", size_formulas),
        ("analysis oracles", analysis_oracles),
        ("clustering duplicate", clustering_duplicate),
        ("fallback totality", fallback_totality),
        ("desk-scale bake-off", desk_bakeoff),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
