//! Evaluates one policy by one method and packages the result as a record.

use std::time::Instant;

use aoi_relay::analytic::{aoi_mean_closed_form, aoi_pmf, aoi_variance_closed_form, TailSpec};
use aoi_relay::markov::{build_chain, cap_for_bias, default_cap, stationary, DEFAULT_SOLVE_TOL};
use aoi_relay::sim::{run, run_audited, SimConfig};
use aoi_relay::{aoi_marginal, AoiPmf, Error, RelayPolicy, SystemParams, ValidatedParams};

use crate::args::{Method, SimArgs};
use crate::record::{Meta, MethodTag, OutputRecord, PmfRow};
use crate::Failure;

/// What to compute besides the moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detail {
    Moments,
    Pmf(TailSpec),
}

/// A fully evaluated law; `pmf` is kept for distance computations.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub record: OutputRecord,
    pub pmf: Option<AoiPmf>,
}

/// Methods to run: the requested ones, or analytic with oracle fallback when none was named.
pub fn resolve_methods(requested: &[Method]) -> (Vec<Method>, bool) {
    if requested.is_empty() {
        (vec![Method::Analytic], true)
    } else {
        let mut methods = requested.to_vec();
        methods.dedup();
        (methods, false)
    }
}

pub fn evaluate(
    params: &SystemParams,
    policy: RelayPolicy,
    method: Method,
    fallback: bool,
    detail: Detail,
    sim: &SimArgs,
) -> Result<Evaluation, Failure> {
    let valid = ValidatedParams::new(*params)?;
    match method {
        Method::Analytic => match analytic(&valid, policy, detail) {
            Err(Error::NearSingular { which, value }) if fallback => {
                let mut eval = oracle(&valid, policy, detail)?;
                eval.record.meta.note =
                    Some(format!("closed form near-singular ({which} = {value:e}); computed by the Markov-chain oracle"));
                Ok(eval)
            }
            other => Ok(other?),
        },
        Method::Oracle => Ok(oracle(&valid, policy, detail)?),
        Method::Sim => simulate(params, policy, detail, sim, false),
    }
}

fn analytic(v: &ValidatedParams, policy: RelayPolicy, detail: Detail) -> Result<Evaluation, Error> {
    let start = Instant::now();
    let mean = aoi_mean_closed_form(v, policy)?;
    let variance = aoi_variance_closed_form(v, policy)?;
    let pmf = match detail {
        Detail::Moments => None,
        Detail::Pmf(spec) => Some(aoi_pmf(v, policy, spec)?),
    };
    let meta = Meta { runtime_ms: elapsed_ms(start), ..Meta::default() };
    Ok(package(*v.params(), policy, MethodTag::Analytic, pmf, mean, variance, meta))
}

/// Chain cap: large enough for a truncation bias below the requested tail tolerance and
/// for every requested row.
pub fn oracle_cap(params: &SystemParams, policy: RelayPolicy, detail: Detail) -> Result<u32, Error> {
    match detail {
        Detail::Moments => default_cap(params, policy),
        Detail::Pmf(TailSpec::TailTol(tol)) => Ok(cap_for_bias(params, policy, tol.min(1e-12))?),
        Detail::Pmf(TailSpec::NMax(n)) => Ok(default_cap(params, policy)?.max(u32::try_from(n).unwrap_or(u32::MAX))),
    }
}

fn oracle(v: &ValidatedParams, policy: RelayPolicy, detail: Detail) -> Result<Evaluation, Error> {
    let start = Instant::now();
    let cap = oracle_cap(v.params(), policy, detail)?;
    let chain = build_chain(v.params(), policy, cap)?;
    let dist = stationary(&chain, DEFAULT_SOLVE_TOL)?;
    let marginal = aoi_marginal(&dist)?;
    let moments = marginal.moments()?;
    let pmf = match detail {
        Detail::Moments => None,
        Detail::Pmf(spec) => Some(trim(&marginal, spec)?),
    };
    let meta = Meta { cap: Some(cap), runtime_ms: elapsed_ms(start), ..Meta::default() };
    Ok(package(*v.params(), policy, MethodTag::Oracle, pmf, moments.mean, moments.variance, meta))
}

pub fn simulate(
    params: &SystemParams,
    policy: RelayPolicy,
    detail: Detail,
    sim: &SimArgs,
    audited: bool,
) -> Result<Evaluation, Failure> {
    ValidatedParams::new(*params)?;
    let start = Instant::now();
    let mut config = SimConfig::new(*params, policy, sim.slots, sim.seed);
    if let Some(b) = sim.burn_in {
        config.burn_in = b;
    }
    let result = if audited { run_audited(&config)? } else { run(&config)? };
    let pmf = match detail {
        Detail::Moments => None,
        Detail::Pmf(TailSpec::NMax(n)) => Some(trim(&result.pmf, TailSpec::NMax(n))?),
        Detail::Pmf(TailSpec::TailTol(_)) => Some(result.pmf),
    };
    let meta = Meta {
        seed: Some(config.seed),
        slots: Some(config.slots),
        burn_in: Some(config.burn_in),
        runtime_ms: elapsed_ms(start),
        audit: result.transition_counts,
        ..Meta::default()
    };
    Ok(package(*params, policy, MethodTag::Simulation, pmf, result.mean, result.variance, meta))
}

/// Cuts `pmf` to `n_max` rows, or to the shortest support whose tail is below the tolerance.
pub fn trim(pmf: &AoiPmf, spec: TailSpec) -> Result<AoiPmf, Error> {
    let probs = pmf.probs();
    let keep = match spec {
        TailSpec::NMax(n) => n.min(probs.len()),
        TailSpec::TailTol(tol) => {
            let mut tail = pmf.tail_mass();
            let mut keep = probs.len();
            while keep > 1 && tail + probs[keep - 1] <= tol {
                tail += probs[keep - 1];
                keep -= 1;
            }
            keep
        }
    };
    let dropped: f64 = probs[keep..].iter().sum();
    AoiPmf::new(probs[..keep].to_vec(), (pmf.tail_mass() + dropped).max(0.0))
}

fn package(
    params: SystemParams,
    policy: RelayPolicy,
    method: MethodTag,
    pmf: Option<AoiPmf>,
    mean: f64,
    variance: f64,
    meta: Meta,
) -> Evaluation {
    let (rows, tail_mass) = match &pmf {
        Some(pmf) => (pmf.rows().map(|(n, probability)| PmfRow { n, probability }).collect(), pmf.tail_mass()),
        None => (Vec::new(), 1.0),
    };
    let record = OutputRecord { policy, method, params, pmf: rows, tail_mass, mean, variance, meta };
    Evaluation { record, pmf }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimming_moves_mass_to_the_tail() {
        let pmf = AoiPmf::new(vec![0.5, 0.25, 0.125], 0.125).unwrap();
        let cut = trim(&pmf, TailSpec::NMax(2)).unwrap();
        assert_eq!(cut.probs(), &[0.5, 0.25]);
        assert_eq!(cut.tail_mass(), 0.25);
        let cut = trim(&pmf, TailSpec::TailTol(0.3)).unwrap();
        assert_eq!(cut.probs(), &[0.5, 0.25]);
        assert_eq!(trim(&pmf, TailSpec::NMax(10)).unwrap(), pmf);
    }

    #[test]
    fn singular_parameters_fall_back_only_by_default() {
        // (1 - pP1) P3 = p (1 - P1) P2: the preemptive closed form divides by zero.
        let params = SystemParams::new(0.4, 0.25, 0.6, 0.2);
        let sim = SimArgs { slots: 10, seed: 0, burn_in: None };
        let policy = RelayPolicy::NoBufferPreempt;
        let err = evaluate(&params, policy, Method::Analytic, false, Detail::Moments, &sim).unwrap_err();
        assert_eq!(err.code, 3);
        let eval = evaluate(&params, policy, Method::Analytic, true, Detail::Moments, &sim).unwrap();
        assert_eq!(eval.record.method, MethodTag::Oracle);
        assert!(eval.record.meta.note.is_some());
    }
}
