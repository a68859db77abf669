//! Wall time per circuit step and per half-chain entropy.
//!
//! cargo run --release --example step_timing -- [p]

use std::time::Instant;

use qcmi::circuit::{Circuit, CircuitConfig};
use qcmi::cliffords::CliffordGroup;
use qcmi::stabilizer::Tableau;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qcmi::Result<()> {
    let p: f64 = std::env::args().nth(1).map_or(0.2036, |s| s.parse().expect("p"));
    let group = CliffordGroup::shared();
    for l in [16usize, 32, 64, 128, 256] {
        let cfg = CircuitConfig::new(l, 4.0, p, 0, 1, 0)?;
        let circuit = Circuit::new(&cfg, group)?;
        let mut state = Tableau::zero_state(l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let steps = 2000;
        let start = Instant::now();
        for _ in 0..steps {
            circuit.step(&mut state, &mut rng);
        }
        let per_step = start.elapsed().as_secs_f64() / steps as f64;
        let half: Vec<usize> = (0..l / 2).collect();
        let start = Instant::now();
        let s: usize = (0..200).map(|_| state.entropy(&half)).sum();
        let per_entropy = start.elapsed().as_secs_f64() / 200.0;
        println!("L={l:>3}: {:>7.1} us/step  {:>6.1} us/entropy  S(L/2)={}", per_step * 1e6, per_entropy * 1e6, s / 200);
    }
    Ok(())
}
