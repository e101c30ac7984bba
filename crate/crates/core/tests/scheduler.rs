use proptest::prelude::*;
use thermosched_core::thermo::time_grid;
use thermosched_core::scheduler::{invert_schedule, uniform_schedule, warp, ProgressCurve, Strategy as Tag, TimeSchedule};

/// A random monotone cumulative curve on a random grid of [0, 1].
fn curve() -> impl proptest::strategy::Strategy<Value = ProgressCurve> {
    (prop::collection::vec(0.0f64..1.0, 1..200), prop::collection::vec(0.0f64..4.0, 200))
        .prop_filter_map("degenerate", |(mut t, rates)| {
            t.push(0.0);
            t.push(1.0);
            t.sort_by(f64::total_cmp);
            t.dedup();
            let rate: Vec<f64> = t.iter().zip(rates.iter().cycle()).map(|(_, r)| *r).collect();
            ProgressCurve::from_rate(t, &rate).ok().filter(|p| p.total() > 0.0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn schedules_round_trip_and_increase(p in curve(), k in 1usize..300) {
        let phi = warp(&p).unwrap();
        let s = invert_schedule(&phi, k, Tag::Eds).unwrap();
        prop_assert_eq!(s.times.len(), k + 1);
        prop_assert!(s.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(s.times[0], 0.0);
        prop_assert_eq!(s.times[k], 1.0);
        for (j, &t) in s.times.iter().enumerate().skip(1).take(k.saturating_sub(1)) {
            prop_assert!((phi.eval(t) - j as f64 / k as f64).abs() < 1e-6);
        }
        let back = TimeSchedule::from_json(&s.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn refinement_contains_coarse_points(p in curve(), k in 1usize..100) {
        let phi = warp(&p).unwrap();
        let coarse = invert_schedule(&phi, k, Tag::Wds).unwrap();
        let fine = invert_schedule(&phi, 2 * k, Tag::Wds).unwrap();
        for (j, &t) in coarse.times.iter().enumerate() {
            prop_assert!((fine.times[2 * j] - t).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_rate_collapses_to_uniform(level in 1e-3f64..1e3, n in 2usize..500, k in 1usize..200) {
        // Same domain as the estimation grid and the uniform schedule.
        let t = time_grid(n).unwrap();
        let p = ProgressCurve::from_rate(t, &vec![level; n]).unwrap();
        let s = invert_schedule(&warp(&p).unwrap(), k, Tag::Eds).unwrap();
        let u = uniform_schedule(k).unwrap();
        for (a, b) in s.times.iter().zip(&u.times) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
