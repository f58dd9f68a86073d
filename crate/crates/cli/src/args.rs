use std::path::PathBuf;

use aoi_relay::{RelayPolicy, SystemParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Stationary age-of-information for relay-assisted slotted status updating.
#[derive(Debug, Parser)]
#[command(name = "aoi-relay", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary AoI distribution.
    Dist(DistArgs),
    /// Mean and variance of the AoI.
    Moments(MomentsArgs),
    /// Mean and variance over a grid of one parameter.
    Sweep(SweepArgs),
    /// Slot-level simulation.
    Simulate(SimulateArgs),
    /// Analytic, oracle and simulated laws compared pairwise.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Analytic,
    Oracle,
    #[value(alias = "simulation")]
    Sim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    P,
    P1,
    P2,
    P3,
}

/// A policy or `all`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySet(pub Vec<RelayPolicy>);

fn parse_policy(s: &str) -> Result<RelayPolicy, String> {
    s.parse()
}

fn parse_policy_set(s: &str) -> Result<PolicySet, String> {
    if s == "all" {
        Ok(PolicySet(RelayPolicy::ALL.to_vec()))
    } else {
        s.parse().map(|p| PolicySet(vec![p]))
    }
}

/// Parses a decimal or a fraction such as `1/3`.
pub fn parse_probability(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num = parse_number(num)?;
            let den = parse_number(den)?;
            if den == 0.0 {
                return Err(format!("`{s}` has a zero denominator"));
            }
            num / den
        }
        None => parse_number(s)?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not a finite number"))
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    // Integers go through u64 so that e.g. `1/3` divides two exact values.
    match s.parse::<u64>() {
        Ok(n) => Ok(n as f64),
        Err(_) => s.parse::<f64>().map_err(|_| format!("`{s}` is not a number or fraction")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Update generation probability per slot.
    #[arg(long, default_value = "2/5", value_parser = parse_probability)]
    pub p: f64,
    /// Source-to-destination success probability.
    #[arg(long, default_value = "1/4", value_parser = parse_probability)]
    pub p1: f64,
    /// Source-to-relay success probability.
    #[arg(long, default_value = "1/3", value_parser = parse_probability)]
    pub p2: f64,
    /// Relay-to-destination success probability.
    #[arg(long, default_value = "1/3", value_parser = parse_probability)]
    pub p3: f64,
}

impl ParamArgs {
    pub fn params(&self) -> SystemParams {
        SystemParams::new(self.p, self.p1, self.p2, self.p3)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    /// Report Pr{AoI = n} for n up to this value.
    #[arg(long, conflicts_with = "tail_tol")]
    pub n_max: Option<usize>,
    /// Extend the support until the remaining tail mass drops below this value.
    #[arg(long)]
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Slots simulated, burn-in included.
    #[arg(long, default_value_t = 10_000_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Slots discarded before recording; defaults to min(slots/1000, 10000).
    #[arg(long)]
    pub burn_in: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: RelayPolicy,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub tail: TailArgs,
    /// Repeat to evaluate several methods; defaults to analytic with oracle fallback.
    #[arg(long, value_enum)]
    pub method: Vec<Method>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    /// A policy name or `all`.
    #[arg(long, value_parser = parse_policy_set, default_value = "all")]
    pub policy: PolicySet,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub method: Vec<Method>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_policy_set, default_value = "all")]
    pub policy: PolicySet,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub sweep_param: SweepParam,
    #[arg(long, value_parser = parse_probability)]
    pub from: f64,
    #[arg(long, value_parser = parse_probability)]
    pub to: f64,
    /// Number of grid points, end points included.
    #[arg(long, default_value_t = 19, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps: u32,
    #[arg(long, value_enum)]
    pub method: Vec<Method>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_policy)]
    pub policy: RelayPolicy,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Only report ages up to this value; the rest is pooled into the tail.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Also tally one-slot transitions against the transition tables.
    #[arg(long)]
    pub audit: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, value_parser = parse_policy_set, default_value = "all")]
    pub policy: PolicySet,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tv_analytic_oracle: f64,
    /// Tolerance for every pair involving the simulation.
    #[arg(long, default_value_t = 0.01)]
    pub tv_sim: f64,
    /// Replace one simulation parameter, e.g. `p=0.9`; repeatable.
    #[arg(long, value_parser = parse_override)]
    pub sim_override: Vec<(SweepParam, f64)>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_override(s: &str) -> Result<(SweepParam, f64), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("`{s}` is not of the form key=value"))?;
    let key = SweepParam::from_str(key.trim(), true)?;
    Ok((key, parse_probability(value)?))
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::P => "p",
            SweepParam::P1 => "p1",
            SweepParam::P2 => "p2",
            SweepParam::P3 => "p3",
        }
    }

    pub fn set(self, params: &mut SystemParams, value: f64) {
        match self {
            SweepParam::P => params.p = value,
            SweepParam::P1 => params.p1 = value,
            SweepParam::P2 => params.p2 = value,
            SweepParam::P3 => params.p3 = value,
        }
    }
}
