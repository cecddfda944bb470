use agvsb_core::costmodel::{
    delay_cost, energy_cost, inventory_cost, leg_energy, power_unit, reported_system_cost,
    system_objective, time_cost, unit_inventory_cost, CostParams, OrderServiceRecord,
};
use agvsb_core::orders::{
    delay_profile_for, DeadlineWindows, ExpediteAccrual, PriorityClass, ProfileKind, ProfileParams,
};
use proptest::prelude::*;

/// Closed-form curves: each ramp is parameterised by where it meets its cap.
fn oracle(
    class: PriorityClass,
    caps: [f64; 4],
    offset: f64,
    sat: f64,
    from_arrival: bool,
    w: f64,
) -> f64 {
    let cap = caps[class.index()];
    let late = w >= offset;
    let frac = ((w - offset) / (sat - offset)).clamp(0.0, 1.0);
    match class {
        PriorityClass::A if from_arrival => cap * (w / offset).min(1.0),
        PriorityClass::A | PriorityClass::B => {
            if late {
                cap
            } else {
                0.0
            }
        }
        PriorityClass::C => {
            if !late {
                0.0
            } else if cap >= 1.0 {
                cap.powf(frac)
            } else {
                cap
            }
        }
        PriorityClass::D => {
            if late {
                cap * frac
            } else {
                0.0
            }
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

#[test]
fn curves_match_closed_forms() {
    let dtw = DeadlineWindows::new([1.0, 2.0, 4.0, 4.0]).unwrap();
    for caps in [
        [2.0, 1.5, 1.0, 0.5],
        [5.0, 4.0, 3.0, 0.2],
        [0.9, 0.8, 0.7, 0.1],
    ] {
        for accrual in [ExpediteAccrual::AfterDeadline, ExpediteAccrual::FromArrival] {
            let params = ProfileParams {
                caps,
                saturation_factor: 2.0,
                expedite_accrual: accrual,
            };
            for class in PriorityClass::ALL {
                let p = delay_profile_for(class, &params, &dtw).unwrap();
                let offset = dtw.offset_secs(class);
                assert_eq!(p.deadline_offset, offset);
                assert_eq!(p.saturation, 2.0 * offset);
                for step in 0..=400 {
                    let w = step as f64 * 3.0 * offset / 400.0;
                    let want = oracle(
                        class,
                        caps,
                        offset,
                        2.0 * offset,
                        accrual == ExpediteAccrual::FromArrival,
                        w,
                    );
                    let got = delay_cost(&p, w);
                    assert!(
                        close(got, want),
                        "{class:?} {caps:?} {accrual:?} w={w}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn dense_sweep_is_monotone_and_capped() {
    let dtw = DeadlineWindows::default();
    for accrual in [ExpediteAccrual::AfterDeadline, ExpediteAccrual::FromArrival] {
        let params = ProfileParams {
            expedite_accrual: accrual,
            ..Default::default()
        };
        for class in PriorityClass::ALL {
            let p = delay_profile_for(class, &params, &dtw).unwrap();
            let mut prev = 0.0;
            for i in 0..10_000 {
                let w = i as f64 * 3.0 * p.saturation / 10_000.0;
                let c = delay_cost(&p, w);
                assert!(c >= prev - 1e-12, "{class:?} falls at {w}");
                assert!(c <= p.cap + 1e-12, "{class:?} exceeds cap at {w}");
                assert!(c >= 0.0);
                prev = c;
            }
            assert_eq!(delay_cost(&p, 3.0 * p.saturation), p.cap);
        }
    }
}

#[test]
fn profile_kinds_and_cap_ordering() {
    let dtw = DeadlineWindows::default();
    let kinds: Vec<ProfileKind> = PriorityClass::ALL
        .iter()
        .map(|c| {
            delay_profile_for(*c, &ProfileParams::default(), &dtw)
                .unwrap()
                .kind
        })
        .collect();
    assert_eq!(
        kinds,
        vec![
            ProfileKind::Expedite,
            ProfileKind::FixedDate,
            ProfileKind::StandardUrgency,
            ProfileKind::Intangible
        ]
    );
    let bad = ProfileParams {
        caps: [0.5, 1.5, 1.0, 2.0],
        ..Default::default()
    };
    assert!(delay_profile_for(PriorityClass::A, &bad, &dtw).is_err());
}

#[test]
fn published_energy_prices() {
    let p = CostParams::default();
    assert!((energy_cost(4112.59, &p) - 49.35).abs() < 0.005);
    assert!((energy_cost(10075.67, &p) - 120.91).abs() < 0.005);
    assert_eq!(energy_cost(0.0, &p), 0.0);
}

#[test]
fn published_cost_identities() {
    let p = CostParams::default();
    let rec = OrderServiceRecord {
        order_id: 1,
        waiting_time: 0.0,
        travel_time: 0.0,
        delay_time: 0.0,
        order_energy: 0.0,
        inventory_cost: 103.41,
        delay_cost: 1612.65,
    };
    let cot = time_cost(&[rec], &p);
    assert!((cot - 1716.06).abs() < 1e-9);
    assert!((reported_system_cost(49.35, cot) - 1765.41).abs() < 1e-9);
    assert_eq!(time_cost(&[], &p), 0.0);
    let zero_beta = CostParams {
        beta: 0.0,
        ..p.clone()
    };
    assert_eq!(time_cost(&[rec], &zero_beta), 103.41);
    assert_eq!(system_objective(49.35, cot, 1.0).unwrap(), 49.35);
    assert_eq!(system_objective(49.35, cot, 0.0).unwrap(), cot);
    assert!((system_objective(49.35, cot, 0.5).unwrap() - 0.5 * (49.35 + cot)).abs() < 1e-9);
    assert!(system_objective(1.0, 1.0, 1.5).is_err());
}

#[test]
fn calibrated_power_and_full_load_hour() {
    let p = CostParams::default();
    assert!((power_unit(720.0, &p) - 201.6).abs() < 1e-9);
    assert!((power_unit(450.0, &p) - (0.1866666666666667 * 450.0 + 67.2)).abs() < 1e-9);
    assert!((leg_energy(720.0, 3600.0, &p) - 201.6).abs() < 1e-9);
}

#[test]
fn inventory_arithmetic() {
    let uihc = unit_inventory_cost(0.25, 2_102_400.0, 1000.0);
    assert!((uihc - 0.001).abs() < 1e-15);
    let p = CostParams {
        uihc,
        ..Default::default()
    };
    assert!((inventory_cost(60.0, &p) - 0.001).abs() < 1e-15);
    assert_eq!(inventory_cost(0.0, &p), 0.0);
}

proptest! {
    #[test]
    fn power_is_affine(a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
        let p = CostParams::default();
        let lhs = power_unit(a, &p) + power_unit(b, &p) - p.delta2;
        prop_assert!((lhs - power_unit(a + b, &p)).abs() < 1e-9);
        prop_assert!(power_unit(a + b, &p) >= power_unit(a, &p));
    }

    #[test]
    fn leg_energy_is_additive(g in 0.0f64..800.0, legs in prop::collection::vec(0.0f64..500.0, 1..8)) {
        let p = CostParams::default();
        let whole = leg_energy(g, legs.iter().sum(), &p);
        let parts: f64 = legs.iter().map(|d| leg_energy(g, *d, &p)).sum();
        prop_assert!((whole - parts).abs() < 1e-9 * whole.max(1.0));
    }

    #[test]
    fn inventory_cost_is_linear(w in 0.0f64..1e6) {
        let p = CostParams::default();
        prop_assert!((inventory_cost(2.0 * w, &p) - 2.0 * inventory_cost(w, &p)).abs() < 1e-9);
    }
}
