use gastrodose::pk::{ppi_concentration, ppi_concentration_before, total_intake};
use gastrodose::{DoseEvent, DoseSchedule, ModelParams};
use proptest::prelude::*;

fn schedule_strategy() -> impl Strategy<Value = DoseSchedule> {
    prop::collection::vec((0.1f64..12.0, 0.0f64..100.0), 0..20).prop_map(|gaps| {
        let mut t = 0.0;
        let events = gaps.into_iter().enumerate().map(|(i, (gap, amount))| {
            t += gap;
            DoseEvent { day: i as u32 + 1, slot: 1, time: t, amount }
        });
        DoseSchedule::from_events(events.collect::<Vec<_>>()).unwrap()
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn superposition_over_disjoint_parts(s in schedule_strategy(), t in 0.0f64..250.0) {
        let p = ModelParams::calibrated();
        let (even, odd): (Vec<_>, Vec<_>) = s.events().iter().enumerate().partition(|(i, _)| i % 2 == 0);
        let a = DoseSchedule::from_events(even.into_iter().map(|(_, e)| *e)).unwrap();
        let b = DoseSchedule::from_events(odd.into_iter().map(|(_, e)| *e)).unwrap();
        let whole = ppi_concentration(t, &s, &p);
        prop_assert!(close(whole, ppi_concentration(t, &a, &p) + ppi_concentration(t, &b, &p)));
        prop_assert!(whole >= 0.0);
    }

    #[test]
    fn future_doses_do_not_matter(s in schedule_strategy(), t in 0.0f64..250.0) {
        let p = ModelParams::calibrated();
        let past = DoseSchedule::from_events(s.events().iter().copied().filter(|e| e.time <= t)).unwrap();
        prop_assert_eq!(ppi_concentration(t, &s, &p), ppi_concentration(t, &past, &p));
    }

    #[test]
    fn jump_at_each_dose_is_its_amount(s in schedule_strategy()) {
        let p = ModelParams::calibrated();
        let scale = 1.0 / (p.volume * p.molar_mass);
        for e in s.events() {
            let jump = ppi_concentration(e.time, &s, &p) - ppi_concentration_before(e.time, &s, &p);
            prop_assert!((jump - e.amount * scale).abs() <= 1e-15 * (1.0 + ppi_concentration(e.time, &s, &p)));
        }
    }

    #[test]
    fn decays_exponentially_between_doses(s in schedule_strategy(), frac in 0.0f64..1.0) {
        let p = ModelParams::calibrated();
        let times: Vec<f64> = s.times().collect();
        for w in times.windows(2) {
            let t1 = w[0];
            let t2 = w[0] + frac * (w[1] - w[0]);
            let expect = ppi_concentration(t1, &s, &p) * (-p.k_el * (t2 - t1)).exp();
            prop_assert!(close(ppi_concentration(t2, &s, &p), expect) || (ppi_concentration(t2, &s, &p) - expect).abs() < 1e-18);
        }
    }

    #[test]
    fn intake_is_at_least_the_largest_dose(s in schedule_strategy()) {
        let biggest = s.events().iter().map(|e| e.amount).fold(0.0, f64::max);
        prop_assert!(total_intake(&s) >= biggest);
    }
}
