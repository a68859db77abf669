//! Dense state-vector reference simulator for small systems.
//!
//! Exists to validate the tableau engine exactly: both simulators replay the
//! same recorded [`Event`] stream, so measurement outcomes line up and
//! entropies can be compared bit for bit.

use nalgebra::{Complex, DMatrix};
use rand::Rng;

use crate::circuit::{Circuit, CircuitConfig, Event, StreamId};
use crate::cliffords::{CliffordGate2, CliffordGroup, Pauli2};
use crate::error::{Error, Result};
use crate::stabilizer::Tableau;

pub type C64 = Complex<f64>;
pub type Mat4 = [[C64; 4]; 4];

pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
const ONE: C64 = Complex { re: 1.0, im: 0.0 };
const I: C64 = Complex { re: 0.0, im: 1.0 };

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn mat_vec(a: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    std::array::from_fn(|r| (0..4).map(|k| a[r][k] * v[k]).sum())
}

pub fn dagger(a: &Mat4) -> Mat4 {
    std::array::from_fn(|r| std::array::from_fn(|c| a[c][r].conj()))
}

/// Matrix of `i^phase P(bits)` in the local basis `|a b>` with index `a + 2 b`
/// (`a` = first qubit).
pub fn pauli_matrix(p: &Pauli2) -> Mat4 {
    let single = |x: u8, z: u8| -> [[C64; 2]; 2] {
        match (x, z) {
            (0, 0) => [[ONE, ZERO], [ZERO, ONE]],
            (1, 0) => [[ZERO, ONE], [ONE, ZERO]],
            (0, 1) => [[ONE, ZERO], [ZERO, -ONE]],
            _ => [[ZERO, -I], [I, ZERO]],
        }
    };
    let (x1, z1) = p.qubit(0);
    let (x2, z2) = p.qubit(1);
    let (s1, s2) = (single(x1, z1), single(x2, z2));
    let phase = I.powi(p.phase as i32);
    std::array::from_fn(|r| std::array::from_fn(|c| phase * s1[r & 1][c & 1] * s2[r >> 1][c >> 1]))
}

/// A unitary realizing the gate's conjugation action, fixed up to global
/// phase: `U|00>` is the joint +1 eigenvector of the images of `Z1` and
/// `Z2`, and `U|ab> = img(X1)^a img(X2)^b U|00>`.
pub fn gate_unitary(g: &CliffordGate2) -> Mat4 {
    let id: Mat4 = std::array::from_fn(|r| std::array::from_fn(|c| if r == c { ONE } else { ZERO }));
    let proj = |p: &Pauli2| -> Mat4 {
        let m = pauli_matrix(p);
        std::array::from_fn(|r| std::array::from_fn(|c| (id[r][c] + m[r][c]) * 0.5))
    };
    let pz = mat_mul(&proj(&g.image(1)), &proj(&g.image(3)));
    let psi0 = (0..4)
        .map(|k| std::array::from_fn::<C64, 4, _>(|r| pz[r][k]))
        .find(|v| v.iter().map(|a| a.norm_sqr()).sum::<f64>() > 0.1)
        .expect("commuting independent Paulis have a joint eigenvector");
    let norm = psi0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let psi0 = psi0.map(|a| a / norm);
    let (x1, x2) = (pauli_matrix(&g.image(0)), pauli_matrix(&g.image(2)));
    let mut u = [[ZERO; 4]; 4];
    for col in 0..4 {
        let mut v = psi0;
        if col & 2 != 0 {
            v = mat_vec(&x2, &v);
        }
        if col & 1 != 0 {
            v = mat_vec(&x1, &v);
        }
        for r in 0..4 {
            u[r][col] = v[r];
        }
    }
    u
}

#[derive(Clone, Debug)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

impl DenseState {
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Config(format!("dense oracle supports 1..={MAX_QUBITS} qubits, got {n}")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(Self { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_unitary(&mut self, u: &Mat4, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::Contract(format!("invalid gate qubits ({i}, {j})")));
        }
        let (bi, bj) = (1usize << i, 1usize << j);
        for base in 0..self.amps.len() {
            if base & (bi | bj) != 0 {
                continue;
            }
            let idx = [base, base | bi, base | bj, base | bi | bj];
            let v: [C64; 4] = std::array::from_fn(|k| self.amps[idx[k]]);
            let w = mat_vec(u, &v);
            for k in 0..4 {
                self.amps[idx[k]] = w[k];
            }
        }
        Ok(())
    }

    pub fn apply_gate_dense(&mut self, g: &CliffordGate2, i: usize, j: usize) -> Result<()> {
        self.apply_unitary(&gate_unitary(g), i, j)
    }

    /// Probability of reading 1 on qubit `q`.
    pub fn prob_one(&self, q: usize) -> f64 {
        let b = 1usize << q;
        self.amps.iter().enumerate().filter(|(k, _)| k & b != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Projects qubit `q` onto `outcome` and renormalizes. Returns the Born
    /// probability of that outcome.
    pub fn project(&mut self, q: usize, outcome: bool) -> Result<f64> {
        let p1 = self.prob_one(q);
        let prob = if outcome { p1 } else { 1.0 - p1 };
        if prob < 1e-12 {
            return Err(Error::Contract(format!("outcome {} on qubit {q} has zero probability", outcome as u8)));
        }
        let b = 1usize << q;
        let scale = 1.0 / prob.sqrt();
        for (k, a) in self.amps.iter_mut().enumerate() {
            if (k & b != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(prob)
    }

    /// Born-rule Z measurement consuming one uniform variate.
    pub fn measure_z_dense<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        let outcome = u >= 1.0 - self.prob_one(q);
        self.project(q, outcome).expect("sampled branch has positive probability");
        outcome
    }

    /// Von Neumann entropy (bits) of the reduced state on `subset`.
    pub fn entropy_dense(&self, subset: &[usize]) -> f64 {
        let mut member = vec![false; self.n];
        for &q in subset {
            assert!(q < self.n);
            member[q] = true;
        }
        let inside: Vec<usize> = (0..self.n).filter(|&q| member[q]).collect();
        let outside: Vec<usize> = (0..self.n).filter(|&q| !member[q]).collect();
        let (keep, trace) = if inside.len() <= outside.len() { (inside, outside) } else { (outside, inside) };
        if keep.is_empty() {
            return 0.0;
        }
        let dk = 1usize << keep.len();
        let dt = 1usize << trace.len();
        let index = |a: usize, b: usize| -> usize {
            let mut k = 0;
            for (pos, &q) in keep.iter().enumerate() {
                k |= ((a >> pos) & 1) << q;
            }
            for (pos, &q) in trace.iter().enumerate() {
                k |= ((b >> pos) & 1) << q;
            }
            k
        };
        let mut rho = DMatrix::<C64>::zeros(dk, dk);
        for b in 0..dt {
            for a in 0..dk {
                let va = self.amps[index(a, b)];
                for a2 in 0..dk {
                    rho[(a, a2)] += va * self.amps[index(a2, b)].conj();
                }
            }
        }
        let eig = rho.symmetric_eigen();
        eig.eigenvalues.iter().filter(|&&l| l > 1e-12).map(|&l| -l * l.log2()).sum()
    }

    /// Replays one recorded tableau event. Measurements are forced onto the
    /// recorded outcome, and the Born probability must match the tableau's
    /// claim (1 for deterministic outcomes, 1/2 otherwise).
    pub fn apply_event(&mut self, e: &Event, gates: &CliffordGroup) -> Result<()> {
        match *e {
            Event::Gate { index, i, j } => self.apply_gate_dense(gates.get(index), i, j),
            Event::Measure { qubit, result } => {
                let prob = self.project(qubit, result.outcome)?;
                let expected = if result.deterministic { 1.0 } else { 0.5 };
                if (prob - expected).abs() > 1e-9 {
                    return Err(Error::Contract(format!(
                        "qubit {qubit}: Born probability {prob} but tableau expected {expected}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Counts from [`cross_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CrossCheck {
    pub entropies: usize,
    pub measurements: usize,
    pub deterministic: usize,
}

/// Runs one monitored circuit on both engines from `|0...0>`, replaying
/// every tableau event on the dense state, and compares the entropies of
/// `subsets` random subsets after each step. The first disagreement is an
/// error.
pub fn cross_check(l: usize, alpha: f64, p: f64, steps: usize, subsets: usize, stream: &StreamId) -> Result<CrossCheck> {
    let group = CliffordGroup::shared();
    let cfg = CircuitConfig::new_allowing_full_measurement(l, alpha, p, steps, stream.master_seed, stream.realization)?;
    let circuit = Circuit::new(&cfg, group)?;
    let mut rng = stream.rng();
    let mut t = Tableau::zero_state(l)?;
    let mut d = DenseState::zero(l)?;
    let mut stats = CrossCheck::default();
    let mut events: Vec<Event> = Vec::new();
    for step in 0..steps {
        events.clear();
        circuit.step_with(&mut t, &mut rng, |e| events.push(e));
        for e in &events {
            d.apply_event(e, group)?;
            if let Event::Measure { result, .. } = e {
                stats.measurements += 1;
                stats.deterministic += result.deterministic as usize;
            }
        }
        for _ in 0..subsets {
            let subset: Vec<usize> = (0..l).filter(|_| rng.random::<bool>()).collect();
            let exact = d.entropy_dense(&subset);
            let bits = t.entropy(&subset);
            if (exact - exact.round()).abs() > 1e-8 || bits as f64 != exact.round() {
                return Err(Error::Contract(format!(
                    "step {step}, subset {subset:?}: tableau {bits} bits, state vector {exact}"
                )));
            }
            stats.entropies += 1;
        }
    }
    Ok(stats)
}
