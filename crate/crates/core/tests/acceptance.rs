//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use aoi_relay::analytic::{
    aoi_mean_closed_form, aoi_pmf, aoi_variance_closed_form, derive_constants, preempt_collapse_coefficients, TailSpec,
};
use aoi_relay::markov::{balance_residuals, build_chain, cap_for_bias, stationary};
use aoi_relay::params::SystemParams;
use aoi_relay::sim::{run, transition_histogram, SimConfig, AUDIT_MIN_VISITS};
use aoi_relay::{aoi_marginal, pmf_mean, total_variation, validate, RelayPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{grid, reference, reference_validated, random_regular};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn baseline() -> Outcome {
    let v = validate(&SystemParams::new(0.4, 0.25, 1.0 / 3.0, 1.0 / 3.0)).map_err(|e| e.to_string())?;
    let policy = RelayPolicy::NoRelay;
    let pmf = aoi_pmf(&v, policy, TailSpec::NMax(400)).map_err(|e| e.to_string())?;
    let worst = (1..=400)
        .map(|n| (pmf.prob(n) - 0.1 * 0.9f64.powi(n as i32 - 1)).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-10, || format!("pmf deviates by {worst:e}"))?;
    let mean = aoi_mean_closed_form(&v, policy).map_err(|e| e.to_string())?;
    let var = aoi_variance_closed_form(&v, policy).map_err(|e| e.to_string())?;
    ensure((mean - 10.0).abs() < 1e-10, || format!("mean {mean}"))?;
    ensure((var - 90.0).abs() < 1e-10, || format!("variance {var}"))?;
    Ok(format!("max pmf error {worst:.1e}, mean {mean}, variance {var}"))
}

fn first_slot() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 50 {
        let params: SystemParams<f64> =
            SystemParams::new(rng.gen_range(0.05..=1.0), rng.gen_range(0.05..=1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let Ok(v) = validate(&params) else { continue };
        sets += 1;
        let q = v.direct_success();
        for policy in RelayPolicy::ALL {
            let analytic = aoi_pmf(&v, policy, TailSpec::NMax(4)).map_err(|e| e.to_string())?.prob(1);
            // The overflow state resets like any other, so the first-slot mass is exact at any cap.
            let chain = build_chain(&params, policy, 50).map_err(|e| e.to_string())?;
            let dist = stationary(&chain, 1e-12).map_err(|e| e.to_string())?;
            let oracle = aoi_marginal(&dist).map_err(|e| e.to_string())?.prob(1);
            let err = (analytic - q).abs().max((oracle - q).abs());
            ensure(err < 1e-10, || format!("{policy} at {params}: analytic {analytic}, oracle {oracle}, pP1 {q}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("50 sets x 4 policies, max error {worst:.1e}"))
}

fn three_way() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_oracle, mut worst_sim) = (0.0f64, 0.0f64);
    for set in 0..20u64 {
        let v = random_regular(&mut rng);
        for policy in RelayPolicy::RELAYED {
            let cap = cap_for_bias(&v, policy, 1e-11).map_err(|e| e.to_string())?;
            let chain = build_chain(&v, policy, cap).map_err(|e| e.to_string())?;
            let dist = stationary(&chain, 1e-12).map_err(|e| e.to_string())?;
            let oracle = aoi_marginal(&dist).map_err(|e| e.to_string())?;
            let analytic = aoi_pmf(&v, policy, TailSpec::NMax(cap as usize)).map_err(|e| e.to_string())?;
            let tv = total_variation(&analytic, &oracle);
            ensure(tv < 1e-8, || format!("{policy} at {}: TV(analytic, oracle) = {tv:e}", v.params()))?;
            worst_oracle = worst_oracle.max(tv);

            let mut config = SimConfig::new(*v.params(), policy, 10_000_000 + 10_000, 1000 + set);
            config.burn_in = 10_000;
            let sim = run(&config).map_err(|e| e.to_string())?;
            let tv = total_variation(&analytic, &sim.pmf);
            ensure(tv < 0.005, || format!("{policy} at {}: TV(analytic, simulation) = {tv}", v.params()))?;
            worst_sim = worst_sim.max(tv);
        }
    }
    Ok(format!("20 sets x 3 policies, max TV oracle {worst_oracle:.1e}, simulation {worst_sim:.1e}"))
}

fn balance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sets = vec![reference_validated()];
    sets.extend((0..3).map(|_| random_regular(&mut rng)));
    let (mut worst, mut lines) = (0.0f64, 0);
    for v in &sets {
        for policy in RelayPolicy::RELAYED {
            let cap = cap_for_bias(v, policy, 1e-13).map_err(|e| e.to_string())?;
            let chain = build_chain(v, policy, cap).map_err(|e| e.to_string())?;
            let dist = stationary(&chain, 1e-13).map_err(|e| e.to_string())?;
            for b in balance_residuals(&dist, 20) {
                ensure(b.residual() < 1e-10, || format!("{policy} line {} at {}: residual {:e}", b.line, b.state, b.residual()))?;
                worst = worst.max(b.residual());
                lines += 1;
            }
        }
    }
    Ok(format!("{lines} equations, max residual {worst:.1e}"))
}

fn identities() -> Outcome {
    let points = grid();
    let mut worst = 0.0f64;
    for v in &points {
        let c = derive_constants(v).map_err(|e| e.to_string())?;
        let (eta1, eta2) = preempt_collapse_coefficients(v).map_err(|e| e.to_string())?;
        let a = (eta1 + eta2 + c.eta).abs();
        let b = (c.beta1 + c.beta2 - v.direct_success()).abs();
        ensure(a < 1e-12 && b < 1e-12, || format!("at {}: {a:e}, {b:e}", v.params()))?;
        worst = worst.max(a).max(b);
    }
    Ok(format!("{} grid points, max deviation {worst:.1e}", points.len()))
}

fn oracle_mean(v: &SystemParams<f64>, policy: RelayPolicy) -> Result<f64, String> {
    let cap = cap_for_bias(v, policy, 1e-13).map_err(|e| e.to_string())?;
    let chain = build_chain(v, policy, cap).map_err(|e| e.to_string())?;
    let dist = stationary(&chain, 1e-13).map_err(|e| e.to_string())?;
    pmf_mean(&aoi_marginal(&dist).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn reference_point() -> Outcome {
    let v = reference_validated();
    let mut means = Vec::new();
    for (policy, expected) in [(RelayPolicy::NoBufferPreempt, 6.25), (RelayPolicy::NoBufferNoPreempt, 6.4375)] {
        let closed = aoi_mean_closed_form(&v, policy).map_err(|e| e.to_string())?;
        let oracle = oracle_mean(&v, policy)?;
        ensure((closed - expected).abs() < 1e-12, || format!("{policy}: closed form {closed}"))?;
        ensure((oracle - closed).abs() < 1e-8, || format!("{policy}: oracle {oracle} vs {closed}"))?;
        means.push(closed);
    }
    let buffer = aoi_mean_closed_form(&v, RelayPolicy::BufferPreempt).map_err(|e| e.to_string())?;
    ensure(means[0] < buffer && buffer < means[1], || format!("buffer mean {buffer} not inside ({}, {})", means[0], means[1]))?;
    Ok(format!("means {} / {buffer:.6} / {}", means[0], means[1]))
}

fn orderings() -> Outcome {
    let order = [RelayPolicy::NoBufferPreempt, RelayPolicy::BufferPreempt, RelayPolicy::NoBufferNoPreempt, RelayPolicy::NoRelay];
    let mut previous: Option<Vec<f64>> = None;
    for p in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let v = validate(&SystemParams::new(p, 0.25, 1.0 / 3.0, 1.0 / 3.0)).map_err(|e| e.to_string())?;
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for policy in order {
            means.push(aoi_mean_closed_form(&v, policy).map_err(|e| e.to_string())?);
            vars.push(aoi_variance_closed_form(&v, policy).map_err(|e| e.to_string())?);
        }
        ensure(means.windows(2).all(|w| w[0] < w[1]), || format!("means out of order at p={p}: {means:?}"))?;
        ensure(vars.windows(2).all(|w| w[0] < w[1]), || format!("variances out of order at p={p}: {vars:?}"))?;
        if let Some(prev) = &previous {
            ensure(means.iter().zip(prev).all(|(m, pm)| m < pm), || format!("means not decreasing at p={p}"))?;
        }
        previous = Some(means);
    }
    Ok("5 sweep points, means and variances ordered, means decreasing in p".into())
}

fn audit() -> Outcome {
    let mut summary = Vec::new();
    for policy in RelayPolicy::RELAYED {
        let audit = transition_histogram(&SimConfig::new(reference(), policy, 6_000_000, 8)).map_err(|e| e.to_string())?;
        for class in &audit.classes {
            ensure(class.visits >= AUDIT_MIN_VISITS, || format!("{policy} {}: only {} visits", class.class, class.visits))?;
            ensure(class.unmatched == 0, || format!("{policy} {}: {} unmatched transitions", class.class, class.unmatched))?;
            for cell in &class.cells {
                ensure(cell.passes(), || format!("{policy} {} -> {}: z = {:.2}", class.class, cell.label, cell.z))?;
            }
        }
        let max_z = audit.classes.iter().flat_map(|c| &c.cells).map(|c| c.z.abs()).fold(0.0, f64::max);
        summary.push(format!("{policy} max |z| {max_z:.2}"));
    }
    Ok(summary.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("non-relay baseline", Duration::from_secs(1), baseline),
        ("first-slot law", Duration::from_secs(30), first_slot),
        ("three-way equivalence", Duration::from_secs(600), three_way),
        ("stationary-equation residuals", Duration::from_secs(60), balance),
        ("coefficient identities", Duration::from_secs(1), identities),
        ("reference-setting point values", Duration::from_secs(60), reference_point),
        ("orderings over a sweep", Duration::from_secs(60), orderings),
        ("transition-table audit", Duration::from_secs(300), audit),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {} ({name}): {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
