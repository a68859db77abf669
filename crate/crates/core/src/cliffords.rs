//! The two-qubit Clifford group, represented by Pauli conjugation actions.
//!
//! A gate is stored as the images of the four generators `X1, Z1, X2, Z2`
//! under `P -> U P U†`. Each image is a Hermitian two-qubit Pauli string with a
//! sign. Global phase of `U` is invisible in this representation, so the group
//! has `|Sp(4, 2)| * 2^4 = 720 * 16 = 11520` elements.
//!
//! Pauli bit layout (shared with [`crate::stabilizer`]): bit 0 = `x1`,
//! bit 1 = `z1`, bit 2 = `x2`, bit 3 = `z2`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};

pub const GROUP_ORDER: usize = 11520;

/// `i^phase * P(bits)` where `P(bits)` is the Hermitian Pauli string with the
/// given x/z bits (so `x = z = 1` on a qubit means `Y`, not `XZ`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pauli2 {
    pub bits: u8,
    pub phase: u8,
}

/// Exponent of `i` in `P(x1, z1) P(x2, z2) = i^g P(x1 ^ x2, z1 ^ z2)` for one
/// qubit in Hermitian form.
#[inline]
pub(crate) fn g_exponent(x1: u8, z1: u8, x2: u8, z2: u8) -> i8 {
    let (x2, z2) = (x2 as i8, z2 as i8);
    match (x1, z1) {
        (0, 0) => 0,
        (1, 1) => z2 - x2,
        (1, 0) => z2 * (2 * x2 - 1),
        _ => x2 * (1 - 2 * z2),
    }
}

impl Pauli2 {
    pub const IDENTITY: Pauli2 = Pauli2 { bits: 0, phase: 0 };

    pub fn new(bits: u8, negative: bool) -> Self {
        Self { bits: bits & 0xf, phase: if negative { 2 } else { 0 } }
    }

    /// Bits of qubit `q` as `(x, z)`.
    #[inline]
    pub fn qubit(&self, q: usize) -> (u8, u8) {
        let b = self.bits >> (2 * q);
        (b & 1, (b >> 1) & 1)
    }

    pub fn commutes_with(&self, other: &Pauli2) -> bool {
        let mut s = 0;
        for q in 0..2 {
            let (x1, z1) = self.qubit(q);
            let (x2, z2) = other.qubit(q);
            s ^= (x1 & z2) ^ (z1 & x2);
        }
        s == 0
    }

    pub fn mul(&self, rhs: &Pauli2) -> Pauli2 {
        let mut e = self.phase as i8 + rhs.phase as i8;
        for q in 0..2 {
            let (x1, z1) = self.qubit(q);
            let (x2, z2) = rhs.qubit(q);
            e += g_exponent(x1, z1, x2, z2);
        }
        Pauli2 { bits: self.bits ^ rhs.bits, phase: e.rem_euclid(4) as u8 }
    }

    /// Sign of a Hermitian element; `None` when the phase is `±i`.
    pub fn sign(&self) -> Option<bool> {
        match self.phase {
            0 => Some(false),
            2 => Some(true),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ph = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{ph}")?;
        for q in 0..2 {
            let c = match self.qubit(q) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A two-qubit Clifford gate given by its conjugation action on the
/// generators `X1, Z1, X2, Z2`.
///
/// Besides the images, the gate carries a word-parallel kernel used by the
/// tableau: for an input Pauli with bits `s`, the conjugated bits are the
/// XOR of the images selected by `s`, and the sign flips iff the Boolean
/// function `phase_anf` (in algebraic normal form over monomials of `s`)
/// evaluates to one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CliffordGate2 {
    images: [u8; 4],
    signs: u8,
    /// For each output bit, the mask of input generators that feed it.
    pub(crate) out_masks: [u8; 4],
    pub(crate) phase_anf: u16,
}

impl CliffordGate2 {
    /// Builds a gate from generator images, rejecting actions that are not
    /// symplectic.
    pub fn from_images(images: [Pauli2; 4]) -> Result<Self> {
        let mut bits = [0u8; 4];
        let mut signs = 0u8;
        for (k, im) in images.iter().enumerate() {
            let neg = im
                .sign()
                .ok_or_else(|| Error::Contract(format!("image {k} is not Hermitian: {im}")))?;
            bits[k] = im.bits & 0xf;
            signs |= (neg as u8) << k;
        }
        let g = Self::raw(bits, signs);
        if !g.is_symplectic() {
            return Err(Error::Contract("generator images violate the commutation relations".into()));
        }
        Ok(g)
    }

    fn raw(images: [u8; 4], signs: u8) -> Self {
        let mut out_masks = [0u8; 4];
        for (o, m) in out_masks.iter_mut().enumerate() {
            for (k, im) in images.iter().enumerate() {
                *m |= ((im >> o) & 1) << k;
            }
        }
        let mut g = Self { images, signs, out_masks, phase_anf: 0 };
        let mut table = [0u8; 16];
        for (s, t) in table.iter_mut().enumerate() {
            *t = g.conjugate(&Pauli2::new(s as u8, false)).sign().unwrap_or(false) as u8;
        }
        // Möbius transform: truth table -> algebraic normal form
        for i in 0..4 {
            for s in 0..16 {
                if s & (1 << i) != 0 {
                    table[s] ^= table[s ^ (1 << i)];
                }
            }
        }
        g.phase_anf = table.iter().enumerate().fold(0u16, |acc, (s, &b)| acc | ((b as u16) << s));
        g
    }

    pub fn identity() -> Self {
        Self::raw([0b0001, 0b0010, 0b0100, 0b1000], 0)
    }

    /// Hadamard on qubit `q` (0 or 1).
    pub fn hadamard(q: usize) -> Self {
        let mut im = Self::identity().images;
        im.swap(2 * q, 2 * q + 1);
        Self::raw(im, 0)
    }

    /// Phase gate `S` on qubit `q`: `X -> Y`, `Z -> Z`.
    pub fn phase(q: usize) -> Self {
        let mut im = Self::identity().images;
        im[2 * q] = 0b11 << (2 * q);
        Self::raw(im, 0)
    }

    /// CNOT with the given control qubit (0 or 1).
    pub fn cnot(control: usize) -> Self {
        if control == 0 {
            Self::raw([0b0101, 0b0010, 0b0100, 0b1010], 0)
        } else {
            Self::raw([0b0001, 0b1010, 0b0101, 0b1000], 0)
        }
    }

    /// The generating set used for enumeration.
    pub fn generators() -> [Self; 6] {
        [Self::hadamard(0), Self::hadamard(1), Self::phase(0), Self::phase(1), Self::cnot(0), Self::cnot(1)]
    }

    /// Image of generator `k` (`0 = X1, 1 = Z1, 2 = X2, 3 = Z2`).
    pub fn image(&self, k: usize) -> Pauli2 {
        Pauli2::new(self.images[k], (self.signs >> k) & 1 == 1)
    }

    pub fn images(&self) -> [Pauli2; 4] {
        [self.image(0), self.image(1), self.image(2), self.image(3)]
    }

    /// Packs the full action (bits and signs) into 20 bits.
    pub fn key(&self) -> u32 {
        (0..4).fold(0u32, |acc, k| {
            let v = self.images[k] as u32 | (((self.signs >> k) & 1) as u32) << 4;
            acc | v << (5 * k)
        })
    }

    /// `U P U†` for an arbitrary two-qubit Pauli `P` (phase included).
    pub fn conjugate(&self, p: &Pauli2) -> Pauli2 {
        // P(s) = i^(x1 z1 + x2 z2) X1^x1 Z1^z1 X2^x2 Z2^z2
        let (x1, z1) = p.qubit(0);
        let (x2, z2) = p.qubit(1);
        let mut acc = Pauli2 { bits: 0, phase: (p.phase + x1 * z1 + x2 * z2) % 4 };
        for k in 0..4 {
            if (p.bits >> k) & 1 == 1 {
                acc = acc.mul(&self.image(k));
            }
        }
        acc
    }

    /// The gate that applies `self` first and `next` second.
    pub fn then(&self, next: &CliffordGate2) -> CliffordGate2 {
        let mut bits = [0u8; 4];
        let mut signs = 0u8;
        for k in 0..4 {
            let im = next.conjugate(&self.image(k));
            bits[k] = im.bits;
            signs |= (im.sign().expect("conjugation preserves Hermiticity") as u8) << k;
        }
        Self::raw(bits, signs)
    }

    /// Images are nonidentity, `X_k`/`Z_k` images anticommute, and all other
    /// image pairs commute.
    pub fn is_symplectic(&self) -> bool {
        let im = self.images();
        if im.iter().any(|p| p.bits == 0) {
            return false;
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let should_anticommute = a / 2 == b / 2;
                if im[a].commutes_with(&im[b]) == should_anticommute {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for CliffordGate2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = ["XI", "ZI", "IX", "IZ"];
        for k in 0..4 {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}->{}", names[k], self.image(k))?;
        }
        Ok(())
    }
}

/// All 11520 two-qubit Clifford actions, in breadth-first discovery order
/// from the identity under [`CliffordGate2::generators`].
#[derive(Clone, Debug)]
pub struct CliffordGroup {
    gates: Vec<CliffordGate2>,
}

impl CliffordGroup {
    pub fn enumerate() -> Result<Self> {
        let gens = CliffordGate2::generators();
        let id = CliffordGate2::identity();
        let mut seen: HashMap<u32, usize> = HashMap::with_capacity(GROUP_ORDER);
        let mut gates = vec![id];
        seen.insert(id.key(), 0);
        let mut queue = VecDeque::from([id]);
        while let Some(g) = queue.pop_front() {
            for h in &gens {
                let next = g.then(h);
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(next.key()) {
                    e.insert(gates.len());
                    gates.push(next);
                    queue.push_back(next);
                }
            }
        }
        if gates.len() != GROUP_ORDER {
            return Err(Error::Contract(format!(
                "closure produced {} elements, expected {GROUP_ORDER}",
                gates.len()
            )));
        }
        Ok(Self { gates })
    }

    /// Process-wide enumeration, built on first use.
    pub fn shared() -> &'static CliffordGroup {
        static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
        GROUP.get_or_init(|| CliffordGroup::enumerate().expect("two-qubit Clifford enumeration"))
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[CliffordGate2] {
        &self.gates
    }

    pub fn get(&self, index: usize) -> &CliffordGate2 {
        &self.gates[index]
    }

    /// Position of a gate in the enumeration, if present.
    pub fn index_of(&self, g: &CliffordGate2) -> Option<usize> {
        self.gates.iter().position(|h| h.key() == g.key())
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.gates.len())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> &CliffordGate2 {
        &self.gates[self.sample_index(rng)]
    }

    /// `(size, number passing the symplectic check)`.
    pub fn census(&self) -> (usize, usize) {
        (self.gates.len(), self.gates.iter().filter(|g| g.is_symplectic()).count())
    }
}

/// Uniform draw from an arbitrary gate list.
pub fn sample_uniform_from<'a, R: Rng + ?Sized>(gates: &'a [CliffordGate2], rng: &mut R) -> &'a CliffordGate2 {
    &gates[rng.random_range(0..gates.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    #[test]
    fn pauli_products() {
        let x = Pauli2::new(0b01, false);
        let z = Pauli2::new(0b10, false);
        let y = Pauli2::new(0b11, false);
        // XZ = -iY, ZX = iY, YX = -iZ
        assert_eq!(x.mul(&z), Pauli2 { bits: 0b11, phase: 3 });
        assert_eq!(z.mul(&x), Pauli2 { bits: 0b11, phase: 1 });
        assert_eq!(y.mul(&x), Pauli2 { bits: 0b10, phase: 3 });
        assert_eq!(y.mul(&y), Pauli2::IDENTITY);
    }

    #[test]
    fn generator_actions() {
        let s = CliffordGate2::phase(0);
        assert_eq!(s.conjugate(&Pauli2::new(0b01, false)), Pauli2::new(0b11, false));
        // S Y S† = -X
        assert_eq!(s.conjugate(&Pauli2::new(0b11, false)), Pauli2::new(0b01, true));
        let h = CliffordGate2::hadamard(1);
        assert_eq!(h.conjugate(&Pauli2::new(0b1100, false)), Pauli2::new(0b1100, true));
        let cx = CliffordGate2::cnot(0);
        assert_eq!(cx.conjugate(&Pauli2::new(0b1000, false)), Pauli2::new(0b1010, false));
        for g in CliffordGate2::generators() {
            assert!(g.is_symplectic());
        }
    }

    #[test]
    fn census() {
        let g = group();
        assert_eq!(g.len(), GROUP_ORDER);
        assert_eq!(g.census(), (GROUP_ORDER, GROUP_ORDER));
        let keys: HashSet<u32> = g.gates().iter().map(|g| g.key()).collect();
        assert_eq!(keys.len(), GROUP_ORDER);
        assert_eq!(g.get(0), &CliffordGate2::identity());
        assert!(g.index_of(&CliffordGate2::cnot(1)).is_some());
    }

    #[test]
    fn closure_spot_check() {
        let g = group();
        let keys: HashSet<u32> = g.gates().iter().map(|g| g.key()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let a = g.sample_uniform(&mut rng);
            let b = g.sample_uniform(&mut rng);
            assert!(keys.contains(&a.then(b).key()));
        }
    }

    #[test]
    fn kernel_matches_conjugation() {
        for gate in group().gates().iter().step_by(7) {
            for s in 0..16u8 {
                let c = gate.conjugate(&Pauli2::new(s, false));
                let mut bits = 0u8;
                for o in 0..4 {
                    bits |= (((gate.out_masks[o] & s).count_ones() & 1) as u8) << o;
                }
                let mut flip = 0u32;
                for m in 0..16u16 {
                    if (gate.phase_anf >> m) & 1 == 1 && (m as u8 & !s) == 0 {
                        flip ^= 1;
                    }
                }
                assert_eq!(bits, c.bits);
                assert_eq!(flip == 1, c.sign().unwrap());
            }
        }
    }

    #[test]
    fn rejects_non_symplectic() {
        let bad = [Pauli2::new(0b0001, false), Pauli2::new(0b0001, false), Pauli2::new(0b0100, false), Pauli2::new(0b1000, false)];
        assert!(CliffordGate2::from_images(bad).is_err());
        let id = CliffordGate2::from_images(CliffordGate2::identity().images()).unwrap();
        assert_eq!(id, CliffordGate2::identity());
    }

    #[test]
    fn sampling_is_deterministic_and_uniform() {
        let g = group();
        let a = g.sample_index(&mut ChaCha8Rng::seed_from_u64(5));
        let b = g.sample_index(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);

        let single = [CliffordGate2::cnot(0)];
        assert_eq!(sample_uniform_from(&single, &mut ChaCha8Rng::seed_from_u64(1)), &single[0]);

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 1_000_000usize;
        let mut counts = vec![0u32; g.len()];
        for _ in 0..draws {
            counts[g.sample_index(&mut rng)] += 1;
        }
        let pk = 1.0 / g.len() as f64;
        let mean = draws as f64 * pk;
        let sigma = (draws as f64 * pk * (1.0 - pk)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 5.0 * sigma, "count {c} vs mean {mean}");
        }
    }
}
