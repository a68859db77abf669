use qcmi::observables::{entropy_profile, Protocol, Region, Scheme};

#[test]
fn unmonitored_chain_saturates_half_chain_entropy() {
    let l = 64;
    let rows = entropy_profile(3.0, 0.0, l, &Protocol::new(512, 12), 4, 8).unwrap();
    for s in rows.iter().filter(|s| s.scheme == Scheme::A && s.region != Region::D) {
        assert_eq!(s.size, l / 2);
        assert!((l as f64 / 2.0 - 3.0..=l as f64 / 2.0).contains(&s.mean), "{s:?}");
    }
    let d = rows.iter().find(|s| s.scheme == Scheme::A && s.region == Region::D).unwrap();
    assert!((l as f64 / 4.0 - 3.0..=l as f64 / 4.0).contains(&d.mean), "{d:?}");
}

#[test]
fn fully_monitored_chain_has_no_entanglement() {
    let rows = entropy_profile(2.0, 1.0, 32, &Protocol::new(128, 4), 4, 3).unwrap();
    assert!(rows.iter().all(|s| s.mean == 0.0 && s.stderr == Some(0.0)));
}
