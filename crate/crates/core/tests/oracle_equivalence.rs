use qcmi::circuit::StreamId;
use qcmi::oracle::cross_check;

#[test]
fn tableau_matches_state_vector() {
    let mut total = 0;
    for ix in 0..60u64 {
        let alpha = [2.0, 3.0, 4.0][ix as usize % 3];
        let p = [0.1, 0.5][(ix as usize / 3) % 2];
        let stream = StreamId { master_seed: 2718, alpha, p, l: 6, tag: 0, realization: ix };
        let stats = cross_check(6, alpha, p, 20, 20, &stream).unwrap();
        assert_eq!(stats.entropies, 400);
        total += stats.measurements;
    }
    assert!(total > 0);
}

#[test]
fn larger_chains_at_the_oracle_limit() {
    for ix in 0..4u64 {
        let stream = StreamId { master_seed: 5, alpha: 2.5, p: 0.2, l: 10, tag: 0, realization: ix };
        cross_check(10, 2.5, 0.2, 12, 10, &stream).unwrap();
    }
}
