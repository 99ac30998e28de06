use netulln_core::netgraph::{generate, GeneratorSpec};
use netulln_core::process::{
    empirical_cov_decay, simulate, theoretical_decay, BoundedLaw, ProcessSpec, ShockScope, Simulator,
};
use netulln_core::rng::Stream;
use proptest::prelude::*;

fn law() -> impl Strategy<Value = BoundedLaw> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|bound| BoundedLaw::Uniform { bound }),
        (0.1f64..2.0, 0.1f64..2.0).prop_map(|(sd, bound)| BoundedLaw::ClippedGaussian { sd, bound }),
        Just(BoundedLaw::Rademacher),
    ]
}

fn process() -> impl Strategy<Value = ProcessSpec> {
    (prop::collection::vec(-1.5f64..1.5, 1..4), -1.0f64..1.0, -1.0f64..1.0, law(), law(), any::<bool>()).prop_map(
        |(weights, loading, location, innovation, shock, global)| ProcessSpec {
            kind: netulln_core::process::ProcessKind::NetworkMa { weights },
            location,
            shock_loading: loading,
            shock_scope: if global { ShockScope::Global } else { ShockScope::Nodal },
            innovation,
            shock,
        },
    )
}

fn network() -> impl Strategy<Value = GeneratorSpec> {
    prop_oneof![
        (3usize..60).prop_map(|n| GeneratorSpec::Cycle { n }),
        (2usize..8, 2usize..8).prop_map(|(rows, cols)| GeneratorSpec::Grid { rows, cols }),
        (5usize..60, 0.1f64..0.4).prop_map(|(n, radius)| GeneratorSpec::RandomGeometric { n, radius }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_same_draw(g in network(), spec in process(), seed in any::<u64>()) {
        let net = generate(&g, 1).unwrap();
        prop_assert_eq!(simulate(&net, &spec, seed).unwrap(), simulate(&net, &spec, seed).unwrap());
    }

    #[test]
    fn draws_are_bounded(g in network(), spec in process(), seed in any::<u64>()) {
        let net = generate(&g, 2).unwrap();
        let sim = Simulator::new(&net, &spec).unwrap();
        let bound = sim.value_bound();
        let draw = sim.draw(Stream::root(seed));
        prop_assert!(draw.values.iter().all(|v| v.abs() <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn decay_tables_are_monotone(spec in process(), p in 3u32..9) {
        let d = theoretical_decay(&spec, p).unwrap();
        prop_assert!(d.invariant_violations().is_empty());
        prop_assert_eq!(d.value(0), Some(1.0));
        let r = spec.radius().unwrap();
        prop_assert_eq!(d.value(2 * r + 1), Some(0.0));
    }
}

#[test]
fn covariance_vanishes_past_twice_the_radius() {
    for (g, weights, seed) in [
        (GeneratorSpec::Cycle { n: 120 }, vec![1.0, 0.5], 1u64),
        (GeneratorSpec::Grid { rows: 12, cols: 12 }, vec![1.0, -0.7], 2),
        (GeneratorSpec::Cycle { n: 90 }, vec![0.6, 0.4, 0.3], 3),
    ] {
        let net = generate(&g, 0).unwrap();
        let spec = ProcessSpec::moving_average(weights.clone(), 0.5);
        let sim = Simulator::new(&net, &spec).unwrap();
        let r = weights.len() - 1;
        let clip = |y: f64| y.clamp(-1.0, 1.0);
        for s in [2 * r + 1, 2 * r + 2] {
            let est = empirical_cov_decay(&sim, &clip, &|y| y, s, 1, 3000, Stream::root(seed).index(s as u64)).unwrap();
            assert!(est.within(3.0), "{g:?} s = {s}: {est:?}");
        }
    }
}
