//! Pure stabilizer states on `n` qubits.
//!
//! The tableau keeps `n` destabilizer and `n` stabilizer generators. Storage is
//! qubit-major: for every qubit `k` there is an x-plane column and a z-plane
//! column, each a bit vector over the `2n` generator rows (destabilizers in the
//! first `h` words, stabilizers in the next `h`, `h = ceil(n / 64)`). A
//! two-qubit gate therefore touches four short columns, a measurement folds
//! one row into a row mask column by column, and the stabilizer block of a
//! subsystem is a straight copy of its columns.
//!
//! Only stabilizer signs are tracked. Destabilizer signs never influence
//! measurement outcomes or entropies.

use std::cell::RefCell;

use rand::Rng;

use crate::cliffords::CliffordGate2;
use crate::error::{Error, Result};
use crate::gf2::{words_for, BitMatrix, WORD_BITS};

const FORMAT_MAGIC: &[u8; 4] = b"QTAB";
const FORMAT_VERSION: u32 = 1;

thread_local! {
    static SCRATCH: RefCell<Vec<u64>> = const { RefCell::new(Vec::new()) };
}

#[inline]
fn bcast(b: bool) -> u64 {
    (b as u64).wrapping_neg()
}

/// Result of a single-qubit Z measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    /// `true` for outcome 1 (eigenvalue -1).
    pub outcome: bool,
    /// Whether the outcome was fixed by the state.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    h: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    sign: Vec<u64>,
}

impl Tableau {
    /// `|0...0>` on `n >= 1` qubits with no parity restriction.
    pub fn zero(n: usize) -> Self {
        assert!(n > 0, "tableau needs at least one qubit");
        let h = words_for(n);
        let mut t = Self { n, h, x: vec![0; 2 * h * n], z: vec![0; 2 * h * n], sign: vec![0; h] };
        for i in 0..n {
            // destabilizer i = X_i, stabilizer i = Z_i
            t.x[i * 2 * h + i / WORD_BITS] |= 1 << (i % WORD_BITS);
            t.z[i * 2 * h + h + i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
        t
    }

    /// The circuit's initial state on an even number `L >= 2` of qubits.
    pub fn zero_state(l: usize) -> Result<Self> {
        if l < 2 || l % 2 != 0 {
            return Err(Error::Config(format!("system size must be even and at least 2, got {l}")));
        }
        Ok(Self::zero(l))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn col(&self, k: usize) -> usize {
        k * 2 * self.h
    }

    #[inline]
    fn bit(words: &[u64], row: usize) -> bool {
        (words[row / WORD_BITS] >> (row % WORD_BITS)) & 1 == 1
    }

    /// Applies `g` with its first qubit on `i` and its second on `j`.
    pub fn apply_gate(&mut self, g: &CliffordGate2, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::Contract(format!("invalid gate qubits ({i}, {j}) for {} qubits", self.n)));
        }
        self.apply_gate_unchecked(g, i, j);
        Ok(())
    }

    pub(crate) fn apply_gate_unchecked(&mut self, g: &CliffordGate2, i: usize, j: usize) {
        let w2 = 2 * self.h;
        let (ci, cj) = (self.col(i), self.col(j));
        let lin: [[u64; 4]; 4] = std::array::from_fn(|o| std::array::from_fn(|k| bcast((g.out_masks[o] >> k) & 1 == 1)));
        let anf = g.phase_anf;
        for w in 0..w2 {
            let v = [self.x[ci + w], self.z[ci + w], self.x[cj + w], self.z[cj + w]];
            let out: [u64; 4] = std::array::from_fn(|o| {
                (v[0] & lin[o][0]) ^ (v[1] & lin[o][1]) ^ (v[2] & lin[o][2]) ^ (v[3] & lin[o][3])
            });
            self.x[ci + w] = out[0];
            self.z[ci + w] = out[1];
            self.x[cj + w] = out[2];
            self.z[cj + w] = out[3];
            if w >= self.h {
                let mut mono = [0u64; 16];
                mono[0] = !0;
                let mut flip = 0u64;
                for s in 1..16usize {
                    mono[s] = mono[s & (s - 1)] & v[s.trailing_zeros() as usize];
                    flip ^= mono[s] & bcast((anf >> s) & 1 == 1);
                }
                self.sign[w - self.h] ^= flip;
            }
        }
    }

    /// Projective Z measurement of qubit `q`; random outcomes are fair coins
    /// drawn from `rng`.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        self.measure_z_with(q, || rng.random::<bool>()).outcome
    }

    /// Projective Z measurement with an explicit coin for the random branch.
    /// `coin` is called only when the outcome is not determined by the state.
    pub fn measure_z_with(&mut self, q: usize, coin: impl FnOnce() -> bool) -> Measurement {
        assert!(q < self.n, "qubit {q} out of range");
        let h = self.h;
        let cq = self.col(q);
        let pivot = (0..h).find_map(|w| {
            let v = self.x[cq + h + w];
            (v != 0).then(|| w * WORD_BITS + v.trailing_zeros() as usize)
        });
        match pivot {
            Some(p) => {
                let outcome = coin();
                self.collapse(q, p, outcome);
                Measurement { outcome, deterministic: false }
            }
            None => Measurement { outcome: self.determined_outcome(q), deterministic: true },
        }
    }

    /// Random-outcome update: multiply stabilizer row `p` into every other
    /// row anticommuting with `Z_q`, move it to destabilizer `p`, and replace
    /// it by `±Z_q`.
    fn collapse(&mut self, q: usize, p: usize, outcome: bool) {
        SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            buf.clear();
            buf.resize(4 * self.h, 0);
            let (mask, acc) = buf.split_at_mut(2 * self.h);
            let (lo, hi) = acc.split_at_mut(self.h);
            self.fold_pivot(q, p, mask, lo, hi);
        });
        self.replace_pivot(q, p, outcome);
    }

    fn fold_pivot(&mut self, q: usize, p: usize, mask: &mut [u64], lo: &mut [u64], hi: &mut [u64]) {
        let (h, n) = (self.h, self.n);
        let w2 = 2 * h;
        let cq = self.col(q);
        mask.copy_from_slice(&self.x[cq..cq + w2]);
        let (pw, pb) = (h + p / WORD_BITS, 1u64 << (p % WORD_BITS));
        mask[pw] &= !pb;

        for k in 0..n {
            let ck = self.col(k);
            let px = self.x[ck + pw] & pb != 0;
            let pz = self.z[ck + pw] & pb != 0;
            if !px && !pz {
                continue;
            }
            for w in 0..h {
                let m = mask[h + w];
                if m == 0 {
                    continue;
                }
                let x2 = self.x[ck + h + w];
                let z2 = self.z[ck + h + w];
                let (plus, minus) = match (px, pz) {
                    (true, false) => (z2 & x2, z2 & !x2),
                    (false, true) => (x2 & !z2, x2 & z2),
                    _ => (z2 & !x2, x2 & !z2),
                };
                let (plus, minus) = (plus & m, minus & m);
                let carry = lo[w] & plus;
                lo[w] ^= plus;
                hi[w] ^= carry;
                let borrow = !lo[w] & minus;
                lo[w] ^= minus;
                hi[w] ^= borrow;
            }
            let (xm, zm) = (bcast(px), bcast(pz));
            let (xs, zs) = (&mut self.x[ck..ck + w2], &mut self.z[ck..ck + w2]);
            for w in 0..w2 {
                xs[w] ^= mask[w] & xm;
                zs[w] ^= mask[w] & zm;
            }
        }
        let rp = bcast(self.sign[p / WORD_BITS] & pb != 0);
        for w in 0..h {
            debug_assert_eq!(lo[w] & mask[h + w], 0, "stabilizer rows must commute");
            let m = mask[h + w];
            self.sign[w] = (self.sign[w] & !m) | ((self.sign[w] ^ rp ^ hi[w]) & m);
        }
    }

    fn replace_pivot(&mut self, q: usize, p: usize, outcome: bool) {
        let (h, n) = (self.h, self.n);
        let cq = self.col(q);
        let (pw, pb) = (h + p / WORD_BITS, 1u64 << (p % WORD_BITS));
        let dw = p / WORD_BITS;
        for k in 0..n {
            let ck = self.col(k);
            for plane in [&mut self.x, &mut self.z] {
                let v = plane[ck + pw] & pb;
                plane[ck + dw] = (plane[ck + dw] & !pb) | v;
                plane[ck + pw] &= !pb;
            }
        }
        self.z[cq + pw] |= pb;
        self.sign[dw] = (self.sign[dw] & !pb) | (bcast(outcome) & pb);
    }

    /// Outcome of a deterministic Z measurement: the sign of the product of
    /// the stabilizers whose destabilizer partners anticommute with `Z_q`.
    ///
    /// The phase of a product of Hermitian Paulis factorizes over qubits; on
    /// one qubit `prod_i i^{x_i z_i} X^{x_i} Z^{z_i}` picks up
    /// `i^{sum x_i z_i - X Z} (-1)^{#(i<j): z_i x_j}`, which is evaluated here
    /// with popcounts and a running prefix parity.
    fn determined_outcome(&self, q: usize) -> bool {
        let h = self.h;
        let cq = self.col(q);
        let sel = &self.x[cq..cq + h];
        let mut e: u32 = 2 * sel.iter().zip(&self.sign).map(|(s, r)| (s & r).count_ones()).sum::<u32>();
        for k in 0..self.n {
            let ck = self.col(k);
            let (mut xsum, mut zsum, mut carry) = (0u32, 0u32, false);
            for w in 0..h {
                let xs = self.x[ck + h + w] & sel[w];
                let zs = self.z[ck + h + w] & sel[w];
                e += (xs & zs).count_ones();
                let mut pre = zs;
                pre ^= pre << 1;
                pre ^= pre << 2;
                pre ^= pre << 4;
                pre ^= pre << 8;
                pre ^= pre << 16;
                pre ^= pre << 32;
                let excl = (pre << 1) ^ bcast(carry);
                e += 2 * (xs & excl).count_ones();
                carry ^= zs.count_ones() & 1 == 1;
                xsum += xs.count_ones();
                zsum += zs.count_ones();
            }
            let xbar = xsum & 1;
            let zbar = zsum & 1;
            debug_assert_eq!(xbar, 0);
            debug_assert_eq!(zbar, (k == q) as u32);
            e = e.wrapping_add(4 - xbar * zbar);
        }
        debug_assert_eq!(e % 2, 0);
        e % 4 == 2
    }

    /// Von Neumann entropy of the qubit subset, in bits.
    ///
    /// Evaluated as `rank(stabilizer block restricted to X) - |X|` on
    /// whichever of `X` and its complement is smaller.
    pub fn entropy(&self, subset: &[usize]) -> usize {
        let mut member = vec![false; self.n];
        for &q in subset {
            assert!(q < self.n, "qubit {q} out of range");
            member[q] = true;
        }
        let m = member.iter().filter(|&&b| b).count();
        let chosen: Vec<usize> = if 2 * m > self.n {
            (0..self.n).filter(|&q| !member[q]).collect()
        } else {
            (0..self.n).filter(|&q| member[q]).collect()
        };
        self.entropy_direct(&chosen)
    }

    /// Entropy of a contiguous block `start..end` (no wrap-around).
    pub fn entropy_range(&self, range: std::ops::Range<usize>) -> usize {
        assert!(range.end <= self.n);
        let m = range.len();
        if 2 * m > self.n {
            let rest: Vec<usize> = (0..range.start).chain(range.end..self.n).collect();
            self.entropy_direct(&rest)
        } else {
            self.entropy_direct(&range.collect::<Vec<_>>())
        }
    }

    /// Entropy via the given subset itself, never its complement. `subset`
    /// must not contain duplicates.
    pub fn entropy_direct(&self, subset: &[usize]) -> usize {
        if subset.is_empty() {
            return 0;
        }
        let h = self.h;
        let mut data = Vec::with_capacity(2 * subset.len() * h);
        for &k in subset {
            assert!(k < self.n, "qubit {k} out of range");
            let ck = self.col(k);
            data.extend_from_slice(&self.x[ck + h..ck + 2 * h]);
            data.extend_from_slice(&self.z[ck + h..ck + 2 * h]);
        }
        let mut m = BitMatrix::from_words(2 * subset.len(), self.n, data).expect("consistent layout");
        m.rank_in_place() - subset.len()
    }

    /// Stabilizer generator `r` as `(x bits, z bits, negative)` over qubits.
    pub fn stabilizer(&self, r: usize) -> (Vec<bool>, Vec<bool>, bool) {
        let row = self.h * WORD_BITS + r;
        let xs = (0..self.n).map(|k| Self::bit(&self.x[self.col(k)..], row)).collect();
        let zs = (0..self.n).map(|k| Self::bit(&self.z[self.col(k)..], row)).collect();
        (xs, zs, Self::bit(&self.sign, r))
    }

    pub fn destabilizer(&self, r: usize) -> (Vec<bool>, Vec<bool>) {
        let xs = (0..self.n).map(|k| Self::bit(&self.x[self.col(k)..], r)).collect();
        let zs = (0..self.n).map(|k| Self::bit(&self.z[self.col(k)..], r)).collect();
        (xs, zs)
    }

    /// Stabilizer generator `r` printed as e.g. `+XZI` (qubit 0 first).
    pub fn stabilizer_string(&self, r: usize) -> String {
        let (xs, zs, neg) = self.stabilizer(r);
        let mut s = String::from(if neg { "-" } else { "+" });
        for (x, z) in xs.into_iter().zip(zs) {
            s.push(match (x, z) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            });
        }
        s
    }

    /// Checks commutation relations and linear independence of the `2n` rows.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        let rows: Vec<(Vec<bool>, Vec<bool>)> = (0..n)
            .map(|r| self.destabilizer(r))
            .chain((0..n).map(|r| {
                let (x, z, _) = self.stabilizer(r);
                (x, z)
            }))
            .collect();
        let anticommute = |a: &(Vec<bool>, Vec<bool>), b: &(Vec<bool>, Vec<bool>)| {
            (0..n).fold(false, |acc, k| acc ^ (a.0[k] & b.1[k]) ^ (a.1[k] & b.0[k]))
        };
        for a in 0..2 * n {
            for b in (a + 1)..2 * n {
                let expect = b == a + n;
                if anticommute(&rows[a], &rows[b]) != expect {
                    return Err(Error::Contract(format!("rows {a} and {b} have wrong commutation")));
                }
            }
        }
        let mut m = BitMatrix::zeros(2 * n, 2 * n);
        for (r, (x, z)) in rows.iter().enumerate() {
            for k in 0..n {
                m.set(r, k, x[k]);
                m.set(r, n + k, z[k]);
            }
        }
        if m.rank() != 2 * n {
            return Err(Error::Contract("generator rows are linearly dependent".into()));
        }
        Ok(())
    }

    /// Raw bit planes behind a `{magic, version, n}` header, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * (self.x.len() * 2 + self.sign.len()));
        out.extend_from_slice(FORMAT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for w in self.x.iter().chain(&self.z).chain(&self.sign) {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != FORMAT_MAGIC {
            return Err(Error::Parse("not a tableau checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported tableau format version {version}")));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if n == 0 {
            return Err(Error::Parse("tableau with zero qubits".into()));
        }
        let h = words_for(n);
        let plane = 2 * h * n;
        let body = &bytes[16..];
        if body.len() != 8 * (2 * plane + h) {
            return Err(Error::Parse("tableau checkpoint has the wrong length".into()));
        }
        let words: Vec<u64> = body.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self {
            n,
            h,
            x: words[..plane].to_vec(),
            z: words[plane..2 * plane].to_vec(),
            sign: words[2 * plane..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cliffords::CliffordGroup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    fn bell() -> Tableau {
        let mut t = Tableau::zero(2);
        t.apply_gate(&CliffordGate2::hadamard(0), 0, 1).unwrap();
        t.apply_gate(&CliffordGate2::cnot(0), 0, 1).unwrap();
        t
    }

    fn random_state(n: usize, depth: usize, p: f64, rng: &mut ChaCha8Rng) -> Tableau {
        let mut t = Tableau::zero(n);
        for _ in 0..depth {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            t.apply_gate(group().sample_uniform(rng), i, j).unwrap();
            if rng.random::<f64>() < p {
                let q = rng.random_range(0..n);
                t.measure_z(q, rng);
            }
        }
        t
    }

    #[test]
    fn zero_state_layout() {
        let t = Tableau::zero_state(2).unwrap();
        assert_eq!(t.stabilizer_string(0), "+ZI");
        assert_eq!(t.stabilizer_string(1), "+IZ");
        assert!(Tableau::zero_state(3).is_err());
        assert!(Tableau::zero_state(0).is_err());
        for s in [vec![0], vec![1], vec![0, 1]] {
            assert_eq!(t.entropy(&s), 0);
        }
        t.check_invariants().unwrap();
    }

    #[test]
    fn zero_state_measures_zero() {
        let mut t = Tableau::zero_state(8).unwrap();
        let before = t.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in 0..8 {
            assert!(!t.measure_z(q, &mut rng));
        }
        assert_eq!(t, before);
    }

    #[test]
    fn identity_gate_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = random_state(6, 30, 0.3, &mut rng);
        let before = t.clone();
        t.apply_gate(&CliffordGate2::identity(), 2, 5).unwrap();
        assert_eq!(t, before);
        assert!(t.apply_gate(&CliffordGate2::identity(), 2, 2).is_err());
        assert!(t.apply_gate(&CliffordGate2::identity(), 2, 6).is_err());
    }

    #[test]
    fn cnot_on_zero_state() {
        let mut t = Tableau::zero(2);
        t.apply_gate(&CliffordGate2::cnot(0), 0, 1).unwrap();
        assert_eq!(t.stabilizer_string(0), "+ZI");
        assert_eq!(t.stabilizer_string(1), "+ZZ");
        assert_eq!(t.entropy(&[0]), 0);
    }

    #[test]
    fn bell_pair() {
        let t = bell();
        assert_eq!(t.stabilizer_string(0), "+XX");
        assert_eq!(t.stabilizer_string(1), "+ZZ");
        assert_eq!(t.entropy(&[0]), 1);
        assert_eq!(t.entropy(&[1]), 1);
        assert_eq!(t.entropy(&[0, 1]), 0);

        let mut ones = 0;
        for seed in 0..400 {
            let mut s = bell();
            let out = s.measure_z(0, &mut ChaCha8Rng::seed_from_u64(seed));
            ones += out as u32;
            assert_eq!(s.entropy(&[0]), 0);
            // the partner qubit is now fixed to the same value
            let second = s.measure_z_with(1, || panic!("must be deterministic"));
            assert!(second.deterministic);
            assert_eq!(second.outcome, out);
        }
        assert!((150..250).contains(&ones), "{ones}");
    }

    #[test]
    fn ghz3_measurement_disentangles() {
        let mut t = Tableau::zero(3);
        t.apply_gate(&CliffordGate2::hadamard(0), 0, 1).unwrap();
        t.apply_gate(&CliffordGate2::cnot(0), 0, 1).unwrap();
        t.apply_gate(&CliffordGate2::cnot(0), 1, 2).unwrap();
        assert_eq!(t.entropy(&[0]), 1);
        t.measure_z(1, &mut ChaCha8Rng::seed_from_u64(9));
        for q in 0..3 {
            assert_eq!(t.entropy(&[q]), 0);
        }
    }

    #[test]
    fn negative_sign_tracking() {
        // X on qubit 0 via H S S H, then measuring gives 1 deterministically
        let mut t = Tableau::zero(2);
        let x = CliffordGate2::hadamard(0)
            .then(&CliffordGate2::phase(0))
            .then(&CliffordGate2::phase(0))
            .then(&CliffordGate2::hadamard(0));
        t.apply_gate(&x, 0, 1).unwrap();
        assert_eq!(t.stabilizer_string(0), "-ZI");
        let m = t.measure_z_with(0, || unreachable!());
        assert!(m.deterministic && m.outcome);
    }

    #[test]
    fn random_states_keep_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for n in [2usize, 3, 5, 8, 13, 70] {
            for _ in 0..20 {
                let mut t = random_state(n, 4 * n, 0.4, &mut rng);
                t.check_invariants().unwrap();
                let all: Vec<usize> = (0..n).collect();
                assert_eq!(t.entropy(&all), 0);
                let k = rng.random_range(0..=n);
                let sub: Vec<usize> = (0..k).collect();
                let rest: Vec<usize> = (k..n).collect();
                assert_eq!(t.entropy_direct(&sub), t.entropy_direct(&rest));
                let q = rng.random_range(0..n);
                t.measure_z(q, &mut rng);
                assert_eq!(t.entropy(&[q]), 0);
                t.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn gates_preserve_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut t = random_state(9, 40, 0.5, &mut rng);
        for _ in 0..10_000 {
            let i = rng.random_range(0..9);
            let j = (i + rng.random_range(1..9)) % 9;
            t.apply_gate(group().sample_uniform(&mut rng), i, j).unwrap();
        }
        t.check_invariants().unwrap();
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_state(67, 200, 0.5, &mut rng);
        let back = Tableau::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);
        assert!(Tableau::from_bytes(b"nope").is_err());
        let mut bad = t.to_bytes();
        bad[4] = 9;
        assert!(Tableau::from_bytes(&bad).is_err());
    }
}
