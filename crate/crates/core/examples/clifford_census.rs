//! Enumerates the two-qubit Clifford group and prints a few of its elements.

use qcmi::cliffords::{CliffordGate2, CliffordGroup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qcmi::Result<()> {
    let group = CliffordGroup::enumerate()?;
    let (size, symplectic) = group.census();
    println!("{size} distinct actions, {symplectic} symplectic");

    for (name, g) in [("H on qubit 1", CliffordGate2::hadamard(0)), ("CNOT 1->2", CliffordGate2::cnot(0))] {
        println!("{name}: index {:?}", group.index_of(&g));
        for (k, label) in ["X1", "Z1", "X2", "Z2"].iter().enumerate() {
            println!("  {label} -> {}", g.image(k));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = group.sample_uniform(&mut rng);
    println!("random element: {g}");
    Ok(())
}
