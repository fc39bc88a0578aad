//! Command-line driver: runs one scenario, a sweep, or a calibration pass
//! and writes `report.csv`, `adaptation_trace.csv` and `summary.txt`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use cep_core::apps::{compute_parallel_degree, SizingParams};
use cep_core::event::{secs_to_micros, Micros};
use cep_core::query::parse_query;
use cep_core::runtime::ExecutionMode;
use cep_core::workload::{
    calibrate, load_scenario, run_scenario, summary_table, sweep, write_report_csv, write_trace_csv, Method,
    RateProfile, ScenarioFile, SweepParam, SweepSection, WorkloadError,
};

#[derive(Debug, Parser)]
#[command(name = "cep-bench", version, about = "Parallel CEP pattern matching benchmark")]
struct Cli {
    /// Query text, or a path to a file holding it.
    #[arg(long)]
    query: Option<String>,
    /// Scenario file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rr, jsq, llsf or apps.
    #[arg(long)]
    method: Option<String>,
    /// Run all four methods.
    #[arg(long)]
    all_methods: bool,
    /// Worker count, or `auto` to size from the rate and measured service rate.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    /// Per-host service rate (events/s); skips calibration.
    #[arg(long)]
    mu: Option<f64>,
    /// Input rate per stream, events/s.
    #[arg(long)]
    rate: Option<f64>,
    /// Ramp the rate, e.g. `100:400:4` (from:to:steps).
    #[arg(long)]
    ramp: Option<String>,
    /// Window such as `1s`, `500ms` or `10` (seconds).
    #[arg(long)]
    window: Option<String>,
    /// Simulated seconds of input.
    #[arg(long)]
    duration: Option<f64>,
    /// `rate=100,200,300` or `window=1,10,100`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// virtual or wallclock.
    #[arg(long)]
    mode: Option<String>,
    /// Per-host slowdown factors, e.g. `2,1`.
    #[arg(long)]
    host_speed: Option<String>,
    /// Measure service rate and batch timings instead of running.
    #[arg(long)]
    calibrate: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Sizing(String),
}

impl From<WorkloadError> for Failure {
    fn from(e: WorkloadError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn parse_window(text: &str) -> Result<Micros, String> {
    let t = text.trim();
    let split = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let v: f64 = num.parse().map_err(|_| format!("bad window {text:?}"))?;
    let secs = match unit.trim() {
        "" | "s" | "sec" => v,
        "ms" => v / 1e3,
        "us" | "µs" => v / 1e6,
        "min" => v * 60.0,
        other => return Err(format!("unknown window unit {other:?}")),
    };
    if secs <= 0.0 {
        return Err("window must be positive".into());
    }
    Ok(secs_to_micros(secs))
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}")))
        .collect()
}

fn query_text(arg: &str) -> Result<String, String> {
    let p = Path::new(arg);
    if p.is_file() {
        fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
    } else {
        Ok(arg.to_string())
    }
}

fn build(cli: &Cli) -> Result<ScenarioFile, Failure> {
    let mut f = match &cli.config {
        Some(p) => load_scenario(p)?,
        None => ScenarioFile::default(),
    };
    if let Some(q) = &cli.query {
        f.query = query_text(q).map_err(Failure::Config)?;
    }
    let mut query = parse_query(&f.query).map_err(|e| Failure::Config(format!("query: {e}")))?;
    if let Some(w) = &cli.window {
        query.window = parse_window(w).map_err(Failure::Config)?;
    }
    f.query = query.to_string();
    if let Some(d) = cli.duration {
        f.workload.duration_s = d;
    }
    if let Some(r) = cli.rate {
        if !(r > 0.0) {
            return Err(Failure::Config("rate must be positive".into()));
        }
        f.workload.rate = RateProfile::Constant(r);
    }
    if let Some(r) = &cli.ramp {
        let parts: Vec<&str> = r.split(':').collect();
        let bad = || Failure::Config(format!("bad ramp {r:?}; expected from:to:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let from: f64 = parts[0].parse().map_err(|_| bad())?;
        let to: f64 = parts[1].parse().map_err(|_| bad())?;
        let steps: usize = parts[2].parse().map_err(|_| bad())?;
        f.workload.rate = RateProfile::ramp(from, to, steps, f.workload.duration_s);
    }
    if let Some(s) = cli.seed {
        f.workload.seed = s;
        f.service.seed = s.wrapping_mul(31).wrapping_add(7);
    }
    if let Some(mode) = &cli.mode {
        mode.parse::<ExecutionMode>().map_err(Failure::Config)?;
        f.mode = mode.clone();
    }
    if let Some(h) = &cli.host_speed {
        f.service.host_speed = parse_list(h).map_err(Failure::Config)?;
    }
    if let Some(d) = cli.delta {
        f.apps.delta = d;
    }
    if let Some(b) = cli.beta {
        f.apps.beta = Some(b);
    }
    if let Some(t) = cli.tau {
        f.apps.tau = t;
    }
    if let Some(mu) = cli.mu {
        f.apps.mu = Some(mu);
    }
    if cli.all_methods {
        f.methods = Method::ALL.iter().map(|m| m.label().to_ascii_lowercase()).collect();
    } else if let Some(m) = &cli.method {
        m.parse::<Method>().map_err(Failure::Config)?;
        f.methods = vec![m.clone()];
    }
    if let Some(s) = &cli.sweep {
        let (param, values) = s
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("bad sweep {s:?}; expected param=v1,v2")))?;
        param.parse::<SweepParam>().map_err(Failure::Config)?;
        let values = if param.eq_ignore_ascii_case("window") {
            values
                .split(',')
                .map(|v| parse_window(v).map(|us| us as f64 / 1e6))
                .collect::<Result<Vec<_>, _>>()
        } else {
            parse_list(values)
        }
        .map_err(Failure::Config)?;
        f.sweep = Some(SweepSection {
            param: param.to_string(),
            values,
        });
    }
    match cli.m.as_deref() {
        None => {}
        Some("auto") => f.m = auto_degree(&f)?,
        Some(v) => {
            f.m = v.parse().map_err(|_| Failure::Config(format!("bad worker count {v:?}")))?;
        }
    }
    if f.m < 1 {
        return Err(Failure::Config("m must be at least 1".into()));
    }
    Ok(f)
}

fn auto_degree(f: &ScenarioFile) -> Result<usize, Failure> {
    let mut single = f.clone();
    single.m = 1;
    let mu = match f.apps.mu {
        Some(mu) => mu,
        None => calibrate(&single.to_scenario()?)?.mu,
    };
    let lambda = match &f.workload.rate {
        RateProfile::Constant(r) => *r,
        RateProfile::Piecewise(p) => p.iter().map(|x| x.0).fold(0.0, f64::max),
    };
    compute_parallel_degree(&SizingParams::new(lambda, mu, f.apps.delta)).map_err(|e| Failure::Sizing(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let f = build(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(format!("{}: {e}", cli.out.display())))?;
    let sc = f.to_scenario()?;
    if cli.calibrate {
        let c = calibrate(&sc)?;
        let text = format!(
            "mu = {:.6}\nbatch_size = {}\nt_ps_batch_us = {:.3}\nt_es_batch_us = {:.3}\nt_rd_us = {:.3}\n",
            c.mu, c.batch_size, c.t_ps_batch_us, c.t_es_batch_us, c.t_rd_us
        );
        fs::write(cli.out.join("calibration.toml"), &text).map_err(|e| Failure::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    if let Some(mu) = sc.mu {
        if !(mu > 0.0) {
            return Err(Failure::Sizing("service rate must be positive".into()));
        }
    }
    let methods = f.methods()?;
    let reports = match f.sweep()? {
        Some((param, values)) => sweep(param, &values, &sc, &methods)?,
        None => methods
            .iter()
            .map(|&m| run_scenario(&sc, m))
            .collect::<Result<Vec<_>, _>>()?,
    };
    write_report_csv(&cli.out.join("report.csv"), &reports)?;
    write_trace_csv(&cli.out.join("adaptation_trace.csv"), &reports)?;
    let table = summary_table(&reports);
    let summary = format!("query: {}\nm: {}\nseed: {}\n\n{table}", f.query, f.m, f.workload.seed);
    fs::write(cli.out.join("summary.txt"), &summary).map_err(|e| Failure::Config(e.to_string()))?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Sizing(msg)) => {
            eprintln!("error: infeasible sizing: {msg}");
            ExitCode::from(2)
        }
    }
}
