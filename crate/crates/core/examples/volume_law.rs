//! Entanglement growth of the half chain without measurements, and its
//! suppression as the measurement rate grows.

use qcmi::circuit::{Circuit, CircuitConfig};
use qcmi::cliffords::CliffordGroup;
use qcmi::observables::{qcmi, Partition, Scheme};
use qcmi::stabilizer::Tableau;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qcmi::Result<()> {
    let l = 64;
    let part = Partition::new(l, Scheme::A)?;
    println!("{:>5} {:>6} {:>8} {:>6}", "p", "t", "S(L/2)", "QCMI");
    for p in [0.0, 0.1, 0.2, 0.3] {
        let cfg = CircuitConfig::new(l, 3.0, p, 256, 3, 0)?;
        let circuit = Circuit::new(&cfg, CliffordGroup::shared())?;
        let mut state = Tableau::zero_state(l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..=256u32 {
            circuit.step(&mut state, &mut rng);
            if t.is_power_of_two() {
                println!("{p:>5.2} {t:>6} {:>8} {:>6}", state.entropy_range(0..l / 2), qcmi(&state, &part));
            }
        }
    }
    Ok(())
}
