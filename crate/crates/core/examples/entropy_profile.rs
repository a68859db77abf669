//! Steady-state entropies of the partition blocks against chord length and
//! the logarithmic fit through them.
//!
//! cargo run --release --example entropy_profile -- [L] [p] [realizations]

use qcmi::observables::{entropy_profile, Protocol};
use qcmi::scaling::{c_tilde, fit_entropy_log};

fn main() -> qcmi::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(64, |s| s.parse().expect("L"));
    let p: f64 = args.next().map_or(0.2036, |s| s.parse().expect("p"));
    let r: usize = args.next().map_or(50, |s| s.parse().expect("realizations"));
    let protocol = Protocol::new(4096, r);
    let rows = entropy_profile(4.0, p, l, &protocol, 11, 8)?;
    for s in &rows {
        println!(
            "scheme {} {:>2}: |X| = {:>3}, chord = {:>7.3}, S = {:.3} +- {:.3}",
            s.scheme,
            s.region.label(),
            s.size,
            s.chord,
            s.mean,
            s.stderr.unwrap_or(f64::NAN)
        );
    }
    let pts: Vec<_> = rows.iter().map(|s| (s.chord, s.mean, s.stderr.unwrap_or(0.0))).collect();
    let f = fit_entropy_log(&pts)?;
    println!("c/3 = {:.3} +- {:.3}, c' = {:.3}, c~ = {:.3}", f.c_over_3, f.c_over_3_err, f.offset, c_tilde(f.c_over_3));
    Ok(())
}
