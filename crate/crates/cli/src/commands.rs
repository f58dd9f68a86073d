//! The five subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use aoi_relay::analytic::TailSpec;
use aoi_relay::sim::{TransitionAudit, AUDIT_MIN_VISITS};
use aoi_relay::{total_variation, AoiPmf, RelayPolicy, SystemParams, ValidatedParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    CompareArgs, DistArgs, Format, Method, MomentsArgs, OutputArgs, SimArgs, SimulateArgs, SweepArgs, TailArgs,
};
use crate::compute::{evaluate, oracle_cap, resolve_methods, simulate, Detail, Evaluation};
use crate::record::{write_json, write_moments_csv, write_pmf_csv, write_sweep_csv, OutputRecord};
use crate::Failure;

enum Table {
    Pmf,
    Moments,
    Sweep,
}

fn open(output: &OutputArgs) -> Result<Box<dyn Write>, Failure> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::new(Failure::USAGE, format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(output: &OutputArgs, records: &[OutputRecord], table: Table) -> Result<(), Failure> {
    let mut out = open(output)?;
    match (output.format, table) {
        (Format::Json, _) => write_json(&mut out, records)?,
        (Format::Csv, Table::Pmf) => write_pmf_csv(&mut out, records)?,
        (Format::Csv, Table::Moments) => write_moments_csv(&mut out, records)?,
        (Format::Csv, Table::Sweep) => write_sweep_csv(&mut out, records)?,
    }
    out.flush()?;
    Ok(())
}

fn tail_spec(tail: &TailArgs) -> Result<TailSpec, Failure> {
    match (tail.n_max, tail.tail_tol) {
        (Some(0), _) => Err(Failure::new(Failure::USAGE, "--n-max must be at least 1")),
        (Some(n), _) => Ok(TailSpec::NMax(n)),
        (None, Some(tol)) if !(tol > 0.0 && tol < 1.0) => {
            Err(Failure::new(Failure::USAGE, format!("--tail-tol {tol} is outside (0, 1)")))
        }
        (None, Some(tol)) => Ok(TailSpec::TailTol(tol)),
        (None, None) => Ok(TailSpec::default()),
    }
}

fn grid_point_errors<T>(results: Vec<Result<T, Failure>>) -> Result<Vec<T>, Failure> {
    results.into_iter().collect()
}

pub fn dist(args: &DistArgs) -> Result<(), Failure> {
    let spec = tail_spec(&args.tail)?;
    let params = args.params.params();
    let (methods, fallback) = resolve_methods(&args.method);
    let evals = grid_point_errors(
        methods
            .par_iter()
            .map(|&m| evaluate(&params, args.policy, m, fallback, Detail::Pmf(spec), &args.sim))
            .collect(),
    )?;
    for (i, a) in evals.iter().enumerate() {
        for b in &evals[i + 1..] {
            if let (Some(pa), Some(pb)) = (&a.pmf, &b.pmf) {
                eprintln!("tv({}, {}) = {:e}", a.record.method.name(), b.record.method.name(), total_variation(pa, pb));
            }
        }
    }
    let records: Vec<_> = evals.into_iter().map(|e| e.record).collect();
    emit(&args.output, &records, Table::Pmf)
}

fn moments_at(params: &SystemParams, policies: &[RelayPolicy], requested: &[Method], sim: &SimArgs) -> Result<Vec<OutputRecord>, Failure> {
    let (methods, fallback) = resolve_methods(requested);
    let jobs: Vec<(RelayPolicy, Method)> = policies.iter().flat_map(|&p| methods.iter().map(move |&m| (p, m))).collect();
    let evals = grid_point_errors(
        jobs.par_iter().map(|&(policy, m)| evaluate(params, policy, m, fallback, Detail::Moments, sim)).collect(),
    )?;
    Ok(evals.into_iter().map(|e| e.record).collect())
}

pub fn moments(args: &MomentsArgs) -> Result<(), Failure> {
    let records = moments_at(&args.params.params(), &args.policy.0, &args.method, &args.sim)?;
    emit(&args.output, &records, Table::Moments)
}

/// `steps` evenly spaced values from `from` to `to`, both included.
pub fn grid(from: f64, to: f64, steps: u32) -> Vec<f64> {
    if steps == 1 {
        return vec![from];
    }
    (0..steps).map(|i| if i + 1 == steps { to } else { from + (to - from) * f64::from(i) / f64::from(steps - 1) }).collect()
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let points = grid(args.from, args.to, args.steps);
    let per_point = grid_point_errors(
        points
            .par_iter()
            .map(|&value| {
                let mut params = args.params.params();
                args.sweep_param.set(&mut params, value);
                let mut records = moments_at(&params, &args.policy.0, &args.method, &args.sim).map_err(|f| {
                    Failure::new(f.code, format!("at {}={value}: {}", args.sweep_param.name(), f.message))
                })?;
                for r in &mut records {
                    r.meta.param_value = Some(value);
                }
                Ok(records)
            })
            .collect(),
    )?;
    let records: Vec<_> = per_point.into_iter().flatten().collect();
    emit(&args.output, &records, Table::Sweep)
}

fn audit_report(audit: &TransitionAudit) -> bool {
    let mut ok = true;
    for class in &audit.classes {
        eprintln!("{} {}: {} visits, {} unmatched", audit.policy, class.class, class.visits, class.unmatched);
        if class.visits < AUDIT_MIN_VISITS {
            eprintln!("  warning: fewer than {AUDIT_MIN_VISITS} visits");
        }
        ok &= class.unmatched == 0;
        for cell in &class.cells {
            let verdict = if cell.passes() { "ok" } else { "FAIL" };
            eprintln!(
                "  -> {:<14} expected {:.6} observed {:.6} z {:+.2} {verdict}",
                cell.label, cell.expected, cell.frequency, cell.z
            );
            ok &= cell.passes();
        }
    }
    ok
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<(), Failure> {
    let spec = match args.n_max {
        Some(0) => return Err(Failure::new(Failure::USAGE, "--n-max must be at least 1")),
        Some(n) => TailSpec::NMax(n),
        None => TailSpec::TailTol(0.0),
    };
    let eval = simulate(&args.params.params(), args.policy, Detail::Pmf(spec), &args.sim, args.audit)?;
    let passed = eval.record.meta.audit.as_ref().is_none_or(audit_report);
    emit(&args.output, &[eval.record], Table::Pmf)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::new(Failure::COMPARISON, "transition audit failed"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub policy: RelayPolicy,
    pub pair: String,
    pub tv: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn compare_policy(args: &CompareArgs, policy: RelayPolicy) -> Result<Vec<PairReport>, Failure> {
    let params = args.params.params();
    let valid = ValidatedParams::new(params)?;
    let cap = oracle_cap(&params, policy, Detail::Moments)?;
    let detail = Detail::Pmf(TailSpec::NMax(cap as usize));
    let analytic = match evaluate(&params, policy, Method::Analytic, false, detail, &args.sim) {
        Ok(e) => Some(e),
        Err(f) if f.code == Failure::SINGULAR => {
            let which = valid.singular_denominators(policy);
            eprintln!("{policy}: analytic skipped, closed form near-singular ({which:?})");
            None
        }
        Err(f) => return Err(f),
    };
    let oracle = evaluate(&params, policy, Method::Oracle, false, detail, &args.sim)?;
    let mut sim_params = params;
    for &(key, value) in &args.sim_override {
        key.set(&mut sim_params, value);
    }
    let sim = simulate(&sim_params, policy, Detail::Pmf(TailSpec::TailTol(0.0)), &args.sim, false)?;

    let pmf = |e: &Evaluation| -> AoiPmf { e.pmf.clone().expect("pmf requested") };
    let mut laws = Vec::new();
    if let Some(a) = &analytic {
        laws.push(("analytic", pmf(a)));
    }
    laws.push(("oracle", pmf(&oracle)));
    laws.push(("simulation", pmf(&sim)));
    let mut reports = Vec::new();
    for i in 0..laws.len() {
        for j in i + 1..laws.len() {
            let tolerance = if laws[j].0 == "simulation" { args.tv_sim } else { args.tv_analytic_oracle };
            let tv = total_variation(&laws[i].1, &laws[j].1);
            reports.push(PairReport { policy, pair: format!("{}-{}", laws[i].0, laws[j].0), tv, tolerance, pass: tv < tolerance });
        }
    }
    Ok(reports)
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    for (name, tol) in [("--tv-analytic-oracle", args.tv_analytic_oracle), ("--tv-sim", args.tv_sim)] {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Failure::new(Failure::USAGE, format!("{name} must be positive")));
        }
    }
    let per_policy = grid_point_errors(args.policy.0.par_iter().map(|&p| compare_policy(args, p)).collect())?;
    let reports: Vec<PairReport> = per_policy.into_iter().flatten().collect();
    let mut out = open(&args.output)?;
    match args.output.format {
        Format::Json => {
            for r in &reports {
                serde_json::to_writer(&mut out, r).map_err(io::Error::from)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &reports {
                w.serialize(r).map_err(io::Error::from)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} {}: tv {:e} >= {:e}", r.policy, r.pair, r.tv, r.tolerance))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(Failure::COMPARISON, format!("comparison failed: {}", failed.join("; "))))
    }
}
