use std::sync::Arc;

use cyldla::dla::{Cluster, DropOptions, GrowUntil};
use cyldla::graph::{self, GraphSpec};
use cyldla::snapshot::Snapshot;
use cyldla::walk::Cylinder;
use cyldla::{rng, spectral, walk1d, EstimateSummary, RegularGraph};
use proptest::prelude::*;

fn small_spec() -> impl Strategy<Value = String> {
    prop_oneof![
        (3usize..40).prop_map(|n| format!("cycle:{n}")),
        (3usize..12).prop_map(|n| format!("complete:{n}")),
        (2usize..6).prop_map(|d| format!("hypercube:{d}")),
        (3usize..6, 1usize..3).prop_map(|(s, d)| format!("torus:{}", vec![s.to_string(); d].join("x"))),
        (3usize..8, any::<u64>()).prop_map(|(h, seed)| format!("random:{}:3:seed={seed}", 2 * h)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_graphs_validate(spec in small_spec(), loops in any::<bool>()) {
        let spec = if loops { format!("{spec}+loops") } else { spec };
        let parsed: GraphSpec = spec.parse().unwrap();
        prop_assert_eq!(parsed.to_string(), spec.clone());
        let g = parsed.build().unwrap();
        prop_assert!(g.validate().passed(), "{spec}");
        let sum: usize = (0..g.n()).map(|v| g.neighbors(v).len()).sum();
        prop_assert_eq!(sum, g.n() * g.degree());
    }

    #[test]
    fn spectrum_is_stochastic(spec in small_spec()) {
        let g = graph::from_spec(&spec).unwrap();
        let p = spectral::eigen_profile(&g);
        prop_assert!((p.eigenvalues[0] - 1.0).abs() < 1e-9);
        prop_assert!(p.eigenvalues.iter().all(|x| (-1.0 - 1e-9..=1.0 + 1e-9).contains(x)));
        prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let trace = g.total_loops() as f64 / g.degree() as f64;
        prop_assert!((p.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-7);
    }

    #[test]
    fn summary_ignores_sample_order(mut xs in prop::collection::vec(-1e6f64..1e6, 2..60), seed in any::<u64>()) {
        let a = EstimateSummary::from_samples(&xs, 0);
        use rand::seq::SliceRandom;
        xs.shuffle(&mut rng::from_seed(seed));
        let b = EstimateSummary::from_samples(&xs, 0);
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 * (1.0 + a.mean.abs()));
        prop_assert!((a.std_error - b.std_error).abs() <= 1e-9 * (1.0 + a.std_error));
        prop_assert!(a.lower(2.0) <= a.mean && a.mean <= a.upper(2.0));
    }

    #[test]
    fn zero_cdf_is_a_distribution(n in 1u32..=32) {
        let cdf: Vec<f64> = (1..=n).map(|m| walk1d::to_f64(&walk1d::zero_count_cdf(n, m).unwrap())).collect();
        prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(cdf.iter().all(|&p| (0.0..=1.0).contains(&p)));
        // only the alternating paths reach n zeros
        prop_assert_eq!(*cdf.last().unwrap(), 1.0 - 0.5f64.powi(n as i32));
    }

    #[test]
    fn growth_keeps_invariants(spec in small_spec(), particles in 1u64..200, seed in any::<u64>()) {
        let cyl = Arc::new(Cylinder::new(graph::from_spec(&spec).unwrap()));
        let mut c = Cluster::new(cyl.clone());
        c.grow(GrowUntil::Particles(particles), &mut rng::from_seed(seed), &DropOptions::default()).unwrap();
        prop_assert!(c.check_invariants().is_ok());
        prop_assert_eq!(c.t(), particles);
        prop_assert_eq!(c.loads().iter().sum::<u64>(), c.n() as u64 + particles);
        let touch = c.first_touch_times();
        prop_assert!(touch.windows(2).all(|w| w[0] < w[1]));

        let text = Snapshot::from_cluster(&c).to_text();
        let back = Snapshot::parse(&text).unwrap().into_cluster(cyl).unwrap();
        prop_assert_eq!(back.stick_log(), c.stick_log());
    }

    #[test]
    fn same_seed_same_cluster(n in 3usize..30, seed in any::<u64>()) {
        let run = || {
            let mut c = Cluster::from_graph(RegularGraph::cycle(n).unwrap());
            c.grow(GrowUntil::Particles(50), &mut rng::from_seed(seed), &DropOptions::default()).unwrap();
            c.stick_log().to_vec()
        };
        prop_assert_eq!(run(), run());
    }
}
