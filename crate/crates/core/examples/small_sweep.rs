//! Steady-state QCMI across the critical region at alpha = 4 on small chains.
//!
//! cargo run --release --example small_sweep -- [realizations] [t_max]

use qcmi::observables::{steady_state_qcmi, Cell, Protocol, Scheme};

fn main() -> qcmi::Result<()> {
    let mut args = std::env::args().skip(1);
    let r: usize = args.next().map_or(100, |s| s.parse().expect("realizations"));
    let t_max: usize = args.next().map_or(1024, |s| s.parse().expect("t_max"));
    let protocol = Protocol::new(t_max, r);
    println!("{:>6} {:>4} {:>10} {:>9} {:>4} {:>5}", "p", "L", "I", "stderr", "dt", "N_t");
    for &l in &[16, 32, 64] {
        for k in 0..5 {
            let p = 0.18 + 0.0125 * k as f64;
            let est = steady_state_qcmi(&Cell { alpha: 4.0, p, l, scheme: Scheme::A }, &protocol, 2024)?;
            println!(
                "{:>6.4} {:>4} {:>10.4} {:>9.4} {:>4} {:>5}",
                p,
                l,
                est.mean,
                est.stderr.unwrap_or(f64::NAN),
                est.delta_t,
                est.n_t
            );
        }
    }
    Ok(())
}
