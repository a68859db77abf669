//! Runs monitored circuits on the tableau and on a dense state vector side
//! by side and checks every subsystem entropy.
//!
//! cargo run --release --example oracle_replay -- [L] [circuits]

use qcmi::circuit::StreamId;
use qcmi::oracle::cross_check;

fn main() -> qcmi::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(8, |s| s.parse().expect("L"));
    let circuits: u64 = args.next().map_or(20, |s| s.parse().expect("circuits"));
    let (mut entropies, mut measured, mut determined) = (0, 0, 0);
    for ix in 0..circuits {
        let alpha = 1.5 + (ix % 4) as f64;
        let p = [0.05, 0.2, 0.5][ix as usize % 3];
        let stream = StreamId { master_seed: 99, alpha, p, l, tag: 0, realization: ix };
        let s = cross_check(l, alpha, p, 30, 16, &stream)?;
        entropies += s.entropies;
        measured += s.measurements;
        determined += s.deterministic;
    }
    println!("L={l}: {circuits} circuits, {entropies} entropies identical");
    println!("{measured} measurements replayed, {determined} with deterministic outcomes");
    Ok(())
}
