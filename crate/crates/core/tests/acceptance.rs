//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are
//! reported but only fail the process when `ACCEPTANCE_STRICT` is set.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use cep_core::apps::{
    batch_size, batches_per_epoch, compute_parallel_degree, kingman_wait, multiserver_wait, tradeoff_solve,
    AppsConfig, AppsDispatcher, AssignHistogram, LatencyHistogram, SizingParams, TimingStats,
};
use cep_core::policy::PolicyKind;
use cep_core::query::{parse_query, reference_evaluate, MatchSet};
use cep_core::runtime::{run_virtual, Dispatcher, RuntimeConfig, StaticDispatcher};
use cep_core::workload::{
    generate_streams, run_scenario, ExperimentReport, Method, RateProfile, ScenarioFile, ServiceModel, WorkloadSpec,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn mean_of(reports: &[ExperimentReport], method: Method) -> f64 {
    reports
        .iter()
        .find(|r| r.method == method)
        .map(|r| r.mean_ms)
        .expect("method was run")
}

fn run_all(file: &ScenarioFile) -> Vec<ExperimentReport> {
    let sc = file.to_scenario().expect("valid scenario");
    Method::ALL
        .iter()
        .map(|&m| run_scenario(&sc, m).expect("run succeeds"))
        .collect()
}

fn with_seed(mut f: ScenarioFile, seed: u64) -> ScenarioFile {
    f.workload.seed = seed;
    f.service.seed = seed.wrapping_mul(31).wrapping_add(7);
    f
}

// 1. Merged output equals the single-threaded reference for every method.
fn oracle_equivalence() -> Verdict {
    let shapes = ["SEQ(E1, E2)", "AND(E1, E2)", "SEQ(E1, AND(E2, E3))"];
    let windows = ["500 ms", "1 s", "5 s"];
    let mut runs = 0usize;
    let mut mismatches = Vec::new();
    for seed in 1..=100u64 {
        let spec = WorkloadSpec {
            rate: RateProfile::Constant(40.0),
            key_cardinality: 30,
            duration_s: 4.0,
            seed,
            event_types: vec!["E1".into(), "E2".into(), "E3".into()],
            ..WorkloadSpec::default()
        };
        let mut stream = generate_streams(&spec).expect("stream");
        stream.truncate(500);
        for shape in shapes {
            for window in windows {
                let query = Arc::new(parse_query(&format!("PATTERN {shape} WHERE [Id] WITHIN {window}")).unwrap());
                let expected = reference_evaluate(&query, &stream).id_tuples();
                for m in 1..=3usize {
                    let cfg = RuntimeConfig {
                        m,
                        queue_capacity: 2,
                        ..RuntimeConfig::default()
                    };
                    for method in Method::ALL {
                        let mut service = ServiceModel {
                            seed,
                            ..ServiceModel::default()
                        };
                        let mut apps;
                        let mut fixed;
                        let dispatcher: &mut dyn Dispatcher = match method {
                            Method::Static(kind) => {
                                fixed = StaticDispatcher::new(kind);
                                &mut fixed
                            }
                            Method::Apps => {
                                let sizing = SizingParams {
                                    tau: 30,
                                    ..SizingParams::new(40.0, 200.0, 0.9)
                                };
                                apps = AppsDispatcher::new(AppsConfig::new(m, sizing));
                                &mut apps
                            }
                        };
                        let out = run_virtual(query.clone(), &stream, &cfg, &mut service, dispatcher).unwrap();
                        runs += 1;
                        if MatchSet::from_unsorted(out.outputs).id_tuples() != expected {
                            mismatches.push(format!("seed {seed} {shape} {window} m={m} {}", method.label()));
                        }
                    }
                }
            }
        }
    }
    let detail = match mismatches.first() {
        None => format!("{runs} runs, all equal to reference"),
        Some(first) => format!("{} of {runs} runs differ, first: {first}", mismatches.len()),
    };
    verdict(mismatches.is_empty(), detail)
}

/// FCFS M/M/m with a shared queue: mean wait in queue over `n` customers.
fn simulate_mmm(lambda: f64, mu: f64, m: usize, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = Exp::new(lambda).unwrap();
    let services = Exp::new(mu).unwrap();
    // Integer nanoseconds keep the heap ordering total.
    let mut free: BinaryHeap<Reverse<u64>> = (0..m).map(|_| Reverse(0u64)).collect();
    let mut t = 0.0f64;
    let mut total_wait = 0.0;
    let warmup = n / 20;
    for k in 0..n + warmup {
        t += arrivals.sample(&mut rng);
        let arrive = (t * 1e9) as u64;
        let Reverse(earliest) = free.pop().expect("m servers");
        let start = arrive.max(earliest);
        let service = (services.sample(&mut rng) * 1e9) as u64;
        free.push(Reverse(start + service));
        if k >= warmup {
            total_wait += (start - arrive) as f64 / 1e9;
        }
    }
    total_wait / n as f64
}

// 2. Queueing formulas against simulation.
fn queueing_validation() -> Verdict {
    let rho = 0.5;
    let mu = 1.0;
    let n = 1_000_000;
    let sim1 = simulate_mmm(rho * mu, mu, 1, n, 11);
    let k = kingman_wait(rho, mu, 1.0, 1.0).unwrap();
    let err1 = (k - sim1).abs() / sim1;
    let mut ok = err1 <= 0.05;
    let mut parts = vec![format!("m=1 formula {k:.4} sim {sim1:.4} err {:.1}%", err1 * 100.0)];
    for m in [2usize, 3] {
        let sim = simulate_mmm(rho * m as f64 * mu, mu, m, n, 11 + m as u64);
        let f = multiserver_wait(rho, mu, m, 1.0, 1.0).unwrap();
        let err = (f - sim).abs() / sim;
        ok &= err <= 0.10;
        parts.push(format!("m={m} formula {f:.4} sim {sim:.4} err {:.1}%", err * 100.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.random_range(0.01..0.99);
        let u = rng.random_range(0.1..100.0);
        let a = rng.random_range(0.0..4.0);
        let s = rng.random_range(0.0..4.0);
        let one = multiserver_wait(r, u, 1, a, s).unwrap();
        let base = kingman_wait(r, u, a, s).unwrap();
        if base > 0.0 {
            worst = worst.max((one - base).abs() / base);
        }
    }
    ok &= worst <= 1e-12;
    parts.push(format!("m=1 reduction max rel diff {worst:.1e}"));
    verdict(ok, parts.join("; "))
}

fn baseline() -> ScenarioFile {
    let mut f = ScenarioFile::default();
    f.workload.duration_s = 120.0;
    f
}

// 3. Baseline: APPS tracks JSQ and both beat RR and LLSF.
fn baseline_reproduction() -> Verdict {
    let seeds = 20u64;
    let mut good = 0;
    let mut apps_vs_jsq = Vec::new();
    let mut jsq_vs_rr = Vec::new();
    let mut jsq_vs_llsf = Vec::new();
    for seed in 1..=seeds {
        let r = run_all(&with_seed(baseline(), seed));
        let rr = mean_of(&r, Method::Static(PolicyKind::RoundRobin));
        let jsq = mean_of(&r, Method::Static(PolicyKind::ShortestQueue));
        let llsf = mean_of(&r, Method::Static(PolicyKind::LeastLoaded));
        let apps = mean_of(&r, Method::Apps);
        apps_vs_jsq.push(apps / jsq - 1.0);
        jsq_vs_rr.push(1.0 - jsq / rr);
        jsq_vs_llsf.push(1.0 - jsq / llsf);
        let close = (apps - jsq).abs() <= 0.10 * jsq;
        let below = |x: f64| x <= 0.85 * rr && x <= 0.85 * llsf;
        if close && below(jsq) && below(apps) {
            good += 1;
        }
    }
    let avg = |v: &[f64]| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
    verdict(
        good * 5 >= seeds * 4,
        format!(
            "{good}/{seeds} seeds; mean APPS over JSQ {:+.1}%, JSQ below RR {:.1}%, JSQ below LLSF {:.1}%",
            avg(&apps_vs_jsq),
            avg(&jsq_vs_rr),
            avg(&jsq_vs_llsf)
        ),
    )
}

fn spread(reports: &[ExperimentReport]) -> f64 {
    let means: Vec<f64> = reports.iter().map(|r| r.mean_ms).collect();
    let max = means.iter().cloned().fold(f64::MIN, f64::max);
    let min = means.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / min
}

// 4. Large windows saturate the hosts and the methods converge.
fn window_sweep() -> Verdict {
    let seeds = 10u64;
    let mut good = 0;
    let mut worst_large: f64 = 0.0;
    let mut narrow = Vec::new();
    for seed in 1..=seeds {
        let mut spreads = [0.0; 2];
        for (slot, window) in [(0, "1 s"), (1, "100 s")] {
            let mut f = with_seed(baseline(), seed);
            f.workload.duration_s = 150.0;
            f.query = format!("PATTERN SEQ(E1, E2) WHERE [Id] WITHIN {window}");
            spreads[slot] = spread(&run_all(&f));
        }
        worst_large = worst_large.max(spreads[1]);
        narrow.push(spreads[0]);
        if spreads[1] < 0.15 && spreads[1] < spreads[0] {
            good += 1;
        }
    }
    let min_narrow = narrow.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        good * 5 >= seeds * 4,
        format!(
            "{good}/{seeds} seeds; worst spread at 100 s {:.2}%, smallest at 1 s {:.1}%",
            worst_large * 100.0,
            min_narrow * 100.0
        ),
    )
}

fn heterogeneous(seed: u64) -> ScenarioFile {
    let mut f = with_seed(ScenarioFile::default(), seed);
    f.m = 3;
    f.queue_capacity = 4;
    f.redirect.base_us = 10_000;
    f.service.base_us = 1_000.0;
    f.service.per_buffer_us = 2.0;
    f.service.per_candidate_us = 10.0;
    f.service.host_speed = vec![6.0, 1.0, 1.0];
    f.apps.tau = 250;
    f.apps.decay = 0.5;
    f.workload.duration_s = 120.0;
    f.workload.rate = RateProfile::ramp(100.0, 400.0, 4, 120.0);
    f
}

// 5. Rate ramp with one slow host.
fn rate_sweep() -> Verdict {
    let seeds = 10u64;
    let mut good = 0;
    let mut high_good = 0;
    let mut gaps = Vec::new();
    for seed in 1..=seeds {
        let r = run_all(&heterogeneous(seed));
        let apps = mean_of(&r, Method::Apps);
        let statics: Vec<f64> = PolicyKind::ALL.iter().map(|&k| mean_of(&r, Method::Static(k))).collect();
        let best = statics.iter().cloned().fold(f64::MAX, f64::min);
        let worst = statics.iter().cloned().fold(f64::MIN, f64::max);
        gaps.push(apps / best - 1.0);
        if apps <= best && apps <= 0.95 * worst {
            good += 1;
        }
        let mut f = heterogeneous(seed);
        f.workload.rate = RateProfile::Constant(400.0);
        f.workload.duration_s = 30.0;
        let sc = f.to_scenario().unwrap();
        let at = |k| run_scenario(&sc, Method::Static(k)).unwrap().mean_ms;
        let rr = at(PolicyKind::RoundRobin);
        if at(PolicyKind::ShortestQueue) < rr && at(PolicyKind::LeastLoaded) < rr {
            high_good += 1;
        }
    }
    let avg_gap = 100.0 * gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(
        good * 5 >= seeds * 4 && high_good * 5 >= seeds * 4,
        format!(
            "APPS at or below every static policy in {good}/{seeds} seeds (mean {avg_gap:+.1}% vs best static); \
             JSQ and LLSF beat RR at 400 ev/s in {high_good}/{seeds}"
        ),
    )
}

// 6. Degree of parallelism and batch size.
fn sizing_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = Vec::new();
    for _ in 0..1000 {
        let lambda = rng.random_range(1.0..5_000.0);
        let mu = rng.random_range(1.0..1_000.0);
        let delta = rng.random_range(0.05..=1.0);
        let p = SizingParams::new(lambda, mu, delta);
        let mut oracle = 1usize;
        while lambda / (oracle as f64 * mu) > delta {
            oracle += 1;
        }
        let got = compute_parallel_degree(&p).unwrap();
        let batch = ((mu * delta).floor() as usize).max(1);
        if got != oracle || batch_size(&p) != batch {
            bad.push(format!("({lambda:.3}, {mu:.3}, {delta:.3}) gave m={got} vs {oracle}"));
        }
    }
    let detail = match bad.first() {
        None => "1000 triples match the linear search".to_string(),
        Some(b) => format!("{} mismatches, first {b}", bad.len()),
    };
    verdict(bad.is_empty(), detail)
}

fn brute_mse(history: &[f64], q: usize, lag: usize) -> Option<f64> {
    if history.len() % q != 0 {
        return None;
    }
    let segs: Vec<f64> = (0..history.len() / q)
        .map(|s| history[s * q..(s + 1) * q].iter().sum::<f64>() / q as f64)
        .collect();
    let n = segs.len();
    if n < lag + 2 {
        return None;
    }
    let mut sum = 0.0;
    for nu in lag + 2..=n {
        let d = segs[nu - 2 - lag] - segs[nu - 2];
        sum += d * d;
    }
    Some(sum / (n - lag - 1) as f64)
}

// 7. Trade-off solver against exhaustive search.
fn tradeoff_solver() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases = 300;
    let mut bad = Vec::new();
    let mut feasible = 0;
    for case in 0..cases {
        let mu = rng.random_range(2.0..12.0);
        let tau = rng.random_range(20..120usize);
        let stats = TimingStats {
            t_ps_batch: rng.random_range(10.0..10_000.0),
            t_rd: rng.random_range(0.0..200.0),
            t_es_batch: rng.random_range(1.0..20_000.0),
            ..TimingStats::default()
        };
        let m = rng.random_range(1..5usize);
        let mut p = SizingParams {
            tau,
            ..SizingParams::new(10.0, mu, 0.9)
        };
        let nb = batches_per_epoch(&p);
        let mut level = 0.0;
        let history: Vec<f64> = (0..nb)
            .map(|_| {
                level += rng.random_range(-1.0..1.0);
                level
            })
            .collect();
        p.beta = if case % 3 == 0 { f64::INFINITY } else { rng.random_range(0.1..3.0) };
        let mut best: Option<(f64, usize, usize)> = None;
        for q in 1..=tau {
            let seg = q as f64 * stats.t_ps_batch + (q as f64 - 1.0) * stats.t_rd;
            for lag in 1..=tau {
                if q > nb || nb % q != 0 {
                    continue;
                }
                let Some(mse) = brute_mse(&history, q, lag) else { continue };
                let covered = lag as f64 * seg / m as f64 > q as f64 * stats.t_es_batch;
                if mse >= p.beta || !covered {
                    continue;
                }
                let key = (mse / seg, lag, q);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let got = tradeoff_solve(&stats, &p, m, &history);
        match best {
            Some((_, lag, q)) => {
                feasible += 1;
                let seg = got.q as f64 * stats.t_ps_batch + (got.q as f64 - 1.0) * stats.t_rd;
                let holds = got.lag as f64 * seg / m as f64 > got.q as f64 * stats.t_es_batch;
                if got.fallback || (got.q, got.lag) != (q, lag) || !holds {
                    bad.push(format!("case {case}: solver ({}, {}) vs search ({q}, {lag})", got.q, got.lag));
                }
            }
            None if !got.fallback => bad.push(format!("case {case}: solver found a pair the search rejects")),
            None => {}
        }
    }
    let detail = match bad.first() {
        None => format!("{cases} cases ({feasible} feasible) agree with exhaustive search"),
        Some(b) => format!("{} disagreements, first {b}", bad.len()),
    };
    verdict(bad.is_empty(), detail)
}

// 8. Histogram normalization, uniformity and redirect expectation.
fn histogram_properties() -> Verdict {
    let mut problems = Vec::new();
    let f = with_seed(baseline(), 3);
    let sc = f.to_scenario().unwrap();
    let stream = generate_streams(&sc.workload).unwrap();
    let sizing = SizingParams {
        tau: 200,
        ..SizingParams::new(100.0, 90.0, 0.9)
    };
    let mut apps = AppsDispatcher::new(AppsConfig::new(sc.runtime.m, sizing));
    let mut cfg = sc.runtime.clone();
    cfg.queue_capacity = 2;
    let mut service = sc.service.clone();
    run_virtual(sc.query.clone(), &stream[..6000], &cfg, &mut service, &mut apps).unwrap();
    for kind in PolicyKind::ALL {
        match apps.histogram().probabilities(kind) {
            Some((ph, pr)) => {
                let sum: f64 = ph.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    problems.push(format!("{kind} sums to {sum}"));
                }
                if ph.iter().chain(&pr).any(|p| !(0.0..=1.0).contains(p)) {
                    problems.push(format!("{kind} has a probability outside [0, 1]"));
                }
            }
            None => problems.push(format!("{kind} has no observations")),
        }
    }
    for m in 1..=6usize {
        let mut h = AssignHistogram::new(m, 32, 1000.0);
        for e in 0..7 * m {
            h.record_assignment(PolicyKind::RoundRobin, e % m, None);
        }
        let (ph, pr) = h.probabilities(PolicyKind::RoundRobin).unwrap();
        if ph.iter().any(|p| (p - 1.0 / m as f64).abs() > f64::EPSILON) || pr.iter().any(|&p| p != 0.0) {
            problems.push(format!("round-robin over m={m} is not uniform: {ph:?}"));
        }
    }
    let fixtures: [(&[i64], f64); 3] = [
        (&[2_000, 4_000], 3_000.0),
        (&[1_000, 1_000, 1_000, 5_000], 2_000.0),
        (&[5_000], 5_000.0),
    ];
    for (latencies, expected) in fixtures {
        let mut h = LatencyHistogram::new(32, 1000.0);
        for &l in latencies {
            h.record(l);
        }
        let got = h.expected_redirect_time();
        if (got - expected).abs() > 1e-9 {
            problems.push(format!("redirect fixture {latencies:?}: {got} vs {expected}"));
        }
    }
    if LatencyHistogram::new(32, 1000.0).expected_redirect_time() != 0.0 {
        problems.push("empty histogram is not 0".into());
    }
    let detail = match problems.first() {
        None => "normalized after a run, uniform round-robin, fixtures match".to_string(),
        Some(p) => format!("{} problems, first {p}", problems.len()),
    };
    verdict(problems.is_empty(), detail)
}

// 9. Identical configuration and seed give identical files.
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_cep-bench"))
            .args(["--all-methods", "--seed", "9", "--duration", "40", "--sweep", "rate=80,120", "--out"])
            .arg(out)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        assert!(status.success(), "cep-bench failed");
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let mut same = true;
    let mut sizes = Vec::new();
    for name in ["report.csv", "adaptation_trace.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        same &= x == y;
        sizes.push(format!("{name} {} bytes", x.len()));
    }
    verdict(same, format!("{} identical across runs: {}", if same { "files" } else { "files NOT" }, sizes.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("queueing formulas", queueing_validation),
        ("baseline ordering", baseline_reproduction),
        ("window sweep", window_sweep),
        ("rate ramp", rate_sweep),
        ("sizing identities", sizing_identities),
        ("trade-off solver", tradeoff_solver),
        ("histogram properties", histogram_properties),
        ("determinism", determinism),
    ];
    // ACCEPTANCE_ONLY=1,3 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let v = check();
        let secs = started.elapsed().as_secs_f64();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({secs:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("{} of {ran} criteria pass", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
