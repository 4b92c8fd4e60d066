use clustmix::anonymize::{member_mean, mix_cluster, random_mix_baseline, MixConfig};
use clustmix::data::{apply_scaler, fit_scaler, make_toy, Dataset};
use clustmix::gdp::{mechanism_delta, MechanismShape};
use clustmix::pipeline::{synthesize_once, PrivacyTarget, SynthesisConfig};
use proptest::prelude::*;

fn toy(kind: &str, n: usize, seed: u64) -> Dataset {
    let d = make_toy(&kind.parse().unwrap(), n, seed).unwrap();
    apply_scaler(&d, &fit_scaler(&d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_candidate_meets_the_target(
        kind in prop::sample::select(vec!["blobs", "moons", "skewed-multimodal"]),
        n in 120usize..400,
        eps in 0.3f64..10.0,
        sigma_max in 0.05f64..1.0,
        slices in 1usize..4,
        seed in 0u64..1000,
    ) {
        let d = toy(kind, n, seed);
        let cfg = SynthesisConfig {
            privacy: PrivacyTarget { epsilon: eps, delta: None },
            n_slices: slices,
            seed,
            ..SynthesisConfig::default()
        };
        match synthesize_once(&d, &cfg, sigma_max) {
            Ok(r) => {
                prop_assert!(r.record_count <= d.len() / r.l_min);
                let target = 1.0 / d.len() as f64;
                for p in &r.records {
                    prop_assert!(p.sigma <= sigma_max * (1.0 + 1e-9));
                    let shape = MechanismShape::new(p.l as u64, p.sigma, 2, 2).unwrap();
                    prop_assert!(mechanism_delta(eps, &shape).unwrap() <= target);
                }
                prop_assert!(r.synthetic().features().iter().all(|v| (0.0..=1.0).contains(v)));
                let again = synthesize_once(&d, &cfg, sigma_max).unwrap();
                prop_assert_eq!(again.synthetic, r.synthetic);
            }
            Err(clustmix::Error::Infeasible(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn scaler_round_trips(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..40)) {
        let labels = vec![0; rows.len()];
        let d = Dataset::from_rows(&rows, labels, 1).unwrap();
        let s = fit_scaler(&d);
        let scaled = apply_scaler(&d, &s).unwrap();
        prop_assert!(scaled.is_unit_scaled());
        let back = s.inverse(&scaled).unwrap();
        for (a, b) in back.features().iter().zip(d.features()) {
            let spread = s.max.iter().zip(&s.min).map(|(hi, lo)| hi - lo).fold(0.0, f64::max);
            prop_assert!((a - b).abs() <= 1e-12 * spread.max(1.0) || spread == 0.0);
        }
    }

    #[test]
    fn mixing_changes_by_at_most_one_over_l(
        members in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 4), 1..30),
        replacement in prop::collection::vec(0.0f64..=1.0, 4),
        which in any::<prop::sample::Index>(),
    ) {
        let l = members.len();
        let refs: Vec<&[f64]> = members.iter().map(Vec::as_slice).collect();
        let a = member_mean(&refs).unwrap();
        let mut swapped = members.clone();
        swapped[which.index(l)] = replacement;
        let refs: Vec<&[f64]> = swapped.iter().map(Vec::as_slice).collect();
        let b = member_mean(&refs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1.0 / l as f64 + 1e-12);
        }
        let zero = mix_cluster(&refs, 0, 0, MixConfig { sigma: 0.0, seed: 1 }).unwrap();
        prop_assert_eq!(zero.features, b);
    }

    #[test]
    fn random_mixing_uses_each_row_once(n in 10usize..200, l in 1usize..10, seed in 0u64..100) {
        let d = toy("moons", n.max(4), seed);
        let count = d.len() / l;
        let recs = random_mix_baseline(&d, l, count, MixConfig { sigma: 0.0, seed }).unwrap();
        prop_assert_eq!(recs.len(), count);
        prop_assert!(recs.iter().all(|r| r.provenance.l == l));
        let too_many = random_mix_baseline(&d, l, count + 1, MixConfig { sigma: 0.0, seed });
        prop_assert!(too_many.is_err());
    }
}
