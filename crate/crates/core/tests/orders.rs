use agvsb_core::layout::{generate_layout, WarehouseScale};
use agvsb_core::orders::{
    ingest_reader, read_stream_csv, synthesize_stream, write_stream_csv, ArrivalWindow, ClassMix,
    DeadlineWindows, PriorityClass, SynthesisParams, PRICE_RANGE, WEIGHT_RANGE_KG,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn window(lo: f64, hi: f64) -> ArrivalWindow {
    ArrivalWindow::new(lo, hi).unwrap()
}

#[test]
fn mean_inter_arrival_matches_window_midpoint() {
    let map = generate_layout(WarehouseScale::Medium, 3);
    let s = synthesize_stream(
        1000,
        &map,
        &SynthesisParams::default(),
        window(0.0, 5.0),
        &DeadlineWindows::default(),
        42,
    )
    .unwrap();
    let gaps: Vec<f64> = s
        .orders
        .windows(2)
        .map(|w| w[1].arrival - w[0].arrival)
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 2.5).abs() <= 0.2, "mean gap {mean}");
    assert!(gaps.iter().all(|g| (0.0..=5.0).contains(g)));
}

#[test]
fn class_frequencies_fit_the_mix() {
    let map = generate_layout(WarehouseScale::Medium, 1);
    let mix = ClassMix::default();
    let params = SynthesisParams {
        class_mix: mix,
        ..Default::default()
    };
    let n = 5000;
    let s = synthesize_stream(
        n,
        &map,
        &params,
        window(0.0, 5.0),
        &DeadlineWindows::default(),
        9,
    )
    .unwrap();
    let mut counts = [0usize; 4];
    for o in &s.orders {
        counts[o.class.index()] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(mix.0)
        .map(|(&c, p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
    assert!(
        p_value > 0.001,
        "chi2 {stat}, p {p_value}, counts {counts:?}"
    );
}

#[test]
fn synthetic_values_stay_in_dataset_ranges() {
    let map = generate_layout(WarehouseScale::Small, 2);
    let s = synthesize_stream(
        2000,
        &map,
        &SynthesisParams::default(),
        window(0.0, 2.0),
        &DeadlineWindows::default(),
        5,
    )
    .unwrap();
    for o in &s.orders {
        assert!((WEIGHT_RANGE_KG.0..=WEIGHT_RANGE_KG.1).contains(&o.weight_kg));
        assert!((PRICE_RANGE.0..=PRICE_RANGE.1).contains(&o.price));
        assert!(map.is_free(o.pickup));
        assert!(map.zone_of(o.pickup).is_some());
    }
    assert!(s.is_consistent());
}

#[test]
fn class_a_offsets_never_exceed_others() {
    let map = generate_layout(WarehouseScale::Small, 4);
    let dtw = DeadlineWindows::new([1.0, 2.0, 4.0, 4.0]).unwrap();
    let s = synthesize_stream(
        400,
        &map,
        &SynthesisParams::default(),
        window(0.0, 5.0),
        &dtw,
        1,
    )
    .unwrap();
    let max_offset = |c: PriorityClass| {
        s.orders
            .iter()
            .filter(|o| o.class == c)
            .map(|o| o.deadline - o.arrival)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let min_offset = |c: PriorityClass| {
        s.orders
            .iter()
            .filter(|o| o.class == c)
            .map(|o| o.deadline - o.arrival)
            .fold(f64::INFINITY, f64::min)
    };
    let a = max_offset(PriorityClass::A);
    assert!((a - 3600.0).abs() < 1e-6);
    for c in [PriorityClass::B, PriorityClass::C, PriorityClass::D] {
        assert!(a <= min_offset(c) + 1e-9);
    }
    assert!(max_offset(PriorityClass::B) <= min_offset(PriorityClass::C) + 1e-9);
}

#[test]
fn deadline_windows_reject_bad_ordering() {
    assert!(DeadlineWindows::new([4.0, 2.0, 4.0, 4.0]).is_err());
    assert!(DeadlineWindows::new([0.0, 2.0, 4.0, 4.0]).is_err());
}

#[test]
fn ingest_is_repeatable_and_survives_a_dump() {
    let map = generate_layout(WarehouseScale::Medium, 7);
    let csv =
        "ID,Warehouse_block,Mode_of_Shipment,Customer_rating,Cost_of_the_Product,Weight_in_gms\n\
               1,D,Flight,4,177,1233\n\
               2,F,Flight,1,216,3088\n\
               3,A,Ship,2,183,3374\n\
               4,B,Road,3,176,1177\n\
               5,C,Ship,5,184,2484\n";
    let dtw = DeadlineWindows::default();
    let a = ingest_reader(csv.as_bytes(), &map, window(0.0, 5.0), &dtw, 11).unwrap();
    let b = ingest_reader(csv.as_bytes(), &map, window(0.0, 5.0), &dtw, 11).unwrap();
    assert_eq!(a.stream, b.stream);
    assert!(a.warnings.is_empty());
    let classes: Vec<char> = a.stream.orders.iter().map(|o| o.class.letter()).collect();
    assert_eq!(classes, vec!['D', 'A', 'B', 'C', 'D']);

    let mut buf = Vec::new();
    write_stream_csv(&mut buf, &a.stream).unwrap();
    assert_eq!(
        read_stream_csv(buf.as_slice(), a.stream.owt).unwrap(),
        a.stream
    );
}

#[test]
fn out_of_range_values_warn_without_failing() {
    let map = generate_layout(WarehouseScale::Small, 1);
    let csv = "id,warehouse block,customer rating,price of the product,weight of the product\n\
               1,A,1,50,9000\n";
    let got = ingest_reader(
        csv.as_bytes(),
        &map,
        window(0.0, 1.0),
        &DeadlineWindows::default(),
        0,
    )
    .unwrap();
    let fields: Vec<&str> = got.warnings.iter().map(|w| w.field).collect();
    assert_eq!(fields, vec!["price", "weight_kg"]);
    assert_eq!(got.warnings[0].row, 2);
    assert_eq!(got.stream.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arrivals_are_monotone_for_any_window(lo in 0.0f64..10.0, width in 0.0f64..20.0, seed in any::<u64>(), n in 1usize..300) {
        let map = generate_layout(WarehouseScale::Small, seed % 5);
        let s = synthesize_stream(n, &map, &SynthesisParams::default(), window(lo, lo + width), &DeadlineWindows::default(), seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.orders.windows(2).all(|w| w[0].arrival <= w[1].arrival));
        prop_assert!(s.orders.iter().all(|o| o.deadline > o.arrival && o.arrival <= s.horizon));
        prop_assert_eq!(s.orders[0].arrival, 0.0);
    }

    #[test]
    fn stream_dump_round_trips(seed in any::<u64>(), n in 1usize..120) {
        let map = generate_layout(WarehouseScale::Small, 0);
        let s = synthesize_stream(n, &map, &SynthesisParams::default(), window(0.0, 7.5), &DeadlineWindows::default(), seed).unwrap();
        let mut buf = Vec::new();
        write_stream_csv(&mut buf, &s).unwrap();
        let back = read_stream_csv(buf.as_slice(), s.owt).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>()) {
        let map = generate_layout(WarehouseScale::Small, 1);
        let make = || synthesize_stream(50, &map, &SynthesisParams::default(), window(0.0, 5.0), &DeadlineWindows::default(), seed).unwrap();
        prop_assert_eq!(make(), make());
    }
}
