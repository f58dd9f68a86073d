mod common;

use aoi_relay::analytic::{aoi_mean_closed_form, aoi_pmf, TailSpec};
use aoi_relay::params::SystemParams;
use aoi_relay::sim::{rng_for, run, run_replicated, step, transition_histogram, SimConfig, SimState, AUDIT_MIN_VISITS};
use aoi_relay::{total_variation, RelayPolicy};
use proptest::prelude::*;
use rand::Rng;

use common::{reference, reference_validated};

#[test]
fn preempt_simulation_matches_analytic_law() {
    let v = reference_validated();
    let policy = RelayPolicy::NoBufferPreempt;
    let sim = run(&SimConfig::new(*v.params(), policy, 10_000_000, 1)).unwrap();
    let analytic = aoi_pmf(&v, policy, TailSpec::NMax(sim.pmf.n_max())).unwrap();
    let tv = total_variation(&sim.pmf, &analytic);
    assert!(tv < 0.005, "tv {tv}");
    assert!((sim.mean - aoi_mean_closed_form(&v, policy).unwrap()).abs() < 0.05, "mean {}", sim.mean);
}

#[test]
fn relay_without_admissions_behaves_like_direct_link() {
    let params = SystemParams::new(0.4, 0.25, 0.0, 0.5);
    let runs: Vec<_> = RelayPolicy::ALL
        .iter()
        .enumerate()
        .map(|(i, &policy)| run(&SimConfig::new(params, policy, 1_000_000, 40 + i as u64)).unwrap())
        .collect();
    for a in &runs {
        for b in &runs {
            assert!(total_variation(&a.pmf, &b.pmf) < 0.01);
        }
    }
}

#[test]
fn audit_examples_fall_within_three_sigma() {
    let params = reference();
    let cases = [
        (RelayPolicy::NoBufferPreempt, "(n,0)", "(1,0)", 4_000_000),
        (RelayPolicy::NoBufferNoPreempt, "(n,m)", "(m+1,0)", 6_000_000),
        // Relay and buffer are both occupied in only a few percent of slots.
        (RelayPolicy::BufferPreempt, "(n,m,l)", "(n+1,m+1,1)", 32_000_000),
    ];
    for (policy, class, successor, slots) in cases {
        let mut config = SimConfig::new(params, policy, 0, 9);
        config.slots = slots;
        config.burn_in = 10_000;
        let audit = transition_histogram(&config).unwrap();
        let row = audit.class(class).unwrap();
        assert!(row.visits >= 1_000_000, "{policy} {class}: {} visits", row.visits);
        let cell = row.cells.iter().find(|c| c.label == successor).unwrap();
        assert!(cell.z.abs() <= 3.0, "{policy} {class} -> {successor}: z = {}", cell.z);
        assert!(audit.passes(AUDIT_MIN_VISITS), "{policy}");
    }
}

#[test]
fn replicated_runs_are_deterministic() {
    let config = SimConfig::new(reference(), RelayPolicy::BufferPreempt, 200_000, 3);
    let a = run_replicated(&config, 4).unwrap();
    let b = run_replicated(&config, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.slots_used, 4 * config.slots_used());
}

fn any_params() -> impl Strategy<Value = SystemParams<f64>> {
    (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(p, p1, p2, p3)| SystemParams::new(p, p1, p2, p3))
}

fn any_policy() -> impl Strategy<Value = RelayPolicy> {
    prop::sample::select(RelayPolicy::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_stay_well_formed(params in any_params(), policy in any_policy(), seed in any::<u64>()) {
        let mut rng = rng_for(seed, 0);
        let mut state = SimState::INITIAL;
        for _ in 0..2_000 {
            let next = step(state, rng.gen(), &params, policy);
            prop_assert!(next.is_consistent(policy));
            prop_assert!(next.aoi <= state.aoi + 1);
            prop_assert!(next.age_state(policy).is_some());
            state = next;
        }
    }

    #[test]
    fn same_seed_same_result(policy in any_policy(), seed in any::<u64>()) {
        let config = SimConfig::new(reference(), policy, 20_000, seed);
        prop_assert_eq!(run(&config).unwrap(), run(&config).unwrap());
    }
}
