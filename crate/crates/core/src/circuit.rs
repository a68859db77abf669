//! Monitored variable-range circuits on a periodic chain.
//!
//! One time step applies `L` random two-qubit Cliffords to pairs at distance
//! `r` drawn with probability `r^-alpha / N`, `N = sum_{x=1}^{L/2} x^-alpha`,
//! then measures every qubit in Z with probability `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cliffords::CliffordGroup;
use crate::error::{Error, Result};
use crate::stabilizer::{Measurement, Tableau};

/// Periodic distance between sites `i != j` on a ring of `l` sites.
pub fn distance(i: usize, j: usize, l: usize) -> Result<usize> {
    if i == j {
        return Err(Error::Contract(format!("distance needs distinct sites, got {i} twice")));
    }
    if i >= l || j >= l {
        return Err(Error::Contract(format!("sites ({i}, {j}) outside ring of {l}")));
    }
    let d = i.abs_diff(j);
    Ok(if d <= l / 2 { d } else { l - d })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitConfig {
    pub l: usize,
    pub alpha: f64,
    pub p: f64,
    pub t_max: usize,
    pub seed: u64,
    pub realization: u64,
}

impl CircuitConfig {
    pub fn new(l: usize, alpha: f64, p: f64, t_max: usize, seed: u64, realization: u64) -> Result<Self> {
        let cfg = Self { l, alpha, p, t_max, seed, realization };
        cfg.validate(false)?;
        Ok(cfg)
    }

    /// Like [`CircuitConfig::new`] but also accepts `p = 1`, for harnesses
    /// that probe the fully measured limit.
    pub fn new_allowing_full_measurement(l: usize, alpha: f64, p: f64, t_max: usize, seed: u64, realization: u64) -> Result<Self> {
        let cfg = Self { l, alpha, p, t_max, seed, realization };
        cfg.validate(true)?;
        Ok(cfg)
    }

    pub fn validate(&self, allow_unit_rate: bool) -> Result<()> {
        if self.l < 2 || self.l % 2 != 0 {
            return Err(Error::Config(format!("L must be even and >= 2, got {}", self.l)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        let p_ok = if allow_unit_rate { (0.0..=1.0).contains(&self.p) } else { (0.0..1.0).contains(&self.p) };
        if !p_ok {
            return Err(Error::Config(format!("measurement rate p out of range: {}", self.p)));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler for the gate distance `r in 1..=L/2`.
#[derive(Clone, Debug)]
pub struct DistanceSampler {
    l: usize,
    cumulative: Vec<f64>,
    normalization: f64,
}

impl DistanceSampler {
    pub fn new(l: usize, alpha: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::Config(format!("ring too small: {l}")));
        }
        let weights: Vec<f64> = (1..=l / 2).map(|x| (x as f64).powf(-alpha)).collect();
        let normalization: f64 = weights.iter().sum();
        if !(normalization > 0.0) || !normalization.is_finite() {
            return Err(Error::Config(format!("degenerate distance normalization for alpha = {alpha}")));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / normalization;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { l, cumulative, normalization })
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn probability(&self, r: usize) -> f64 {
        assert!((1..=self.l / 2).contains(&r));
        let prev = if r == 1 { 0.0 } else { self.cumulative[r - 2] };
        self.cumulative[r - 1] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1) + 1
    }

    /// Uniform first site, power-law distance, uniform direction.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let i = rng.random_range(0..self.l);
        let r = self.sample(rng);
        let j = if rng.random::<bool>() { (i + r) % self.l } else { (i + self.l - r) % self.l };
        (i, j)
    }
}

/// Everything that happens to the state during a step, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Gate { index: usize, i: usize, j: usize },
    Measure { qubit: usize, result: Measurement },
}

/// Stateless driver for one `(L, alpha, p)` point.
#[derive(Clone, Debug)]
pub struct Circuit<'g> {
    l: usize,
    p: f64,
    sampler: DistanceSampler,
    gates: &'g CliffordGroup,
}

impl<'g> Circuit<'g> {
    pub fn new(cfg: &CircuitConfig, gates: &'g CliffordGroup) -> Result<Self> {
        cfg.validate(true)?;
        Ok(Self { l: cfg.l, p: cfg.p, sampler: DistanceSampler::new(cfg.l, cfg.alpha)?, gates })
    }

    pub fn sampler(&self) -> &DistanceSampler {
        &self.sampler
    }

    /// One time step: `L` gates, then a Bernoulli(`p`) measurement trial per
    /// qubit in ascending order.
    pub fn step<R: Rng + ?Sized>(&self, t: &mut Tableau, rng: &mut R) {
        self.step_with(t, rng, |_| {});
    }

    pub fn step_with<R: Rng + ?Sized>(&self, t: &mut Tableau, rng: &mut R, mut on_event: impl FnMut(Event)) {
        assert_eq!(t.num_qubits(), self.l, "tableau size does not match the circuit");
        for _ in 0..self.l {
            let (i, j) = self.sampler.sample_pair(rng);
            let index = self.gates.sample_index(rng);
            t.apply_gate_unchecked(self.gates.get(index), i, j);
            on_event(Event::Gate { index, i, j });
        }
        for qubit in 0..self.l {
            if rng.random::<f64>() < self.p {
                let result = t.measure_z_with(qubit, || rng.random::<bool>());
                on_event(Event::Measure { qubit, result });
            }
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies an independent random stream. Every field feeds the seed, so
/// streams for different cells, partition schemes, run phases, or
/// realizations never coincide and can be generated in any order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamId {
    pub master_seed: u64,
    pub alpha: f64,
    pub p: f64,
    pub l: usize,
    /// Distinguishes otherwise identical cells (e.g. partition scheme).
    pub tag: u64,
    pub realization: u64,
}

impl StreamId {
    pub fn seed(&self) -> [u8; 32] {
        let mut h = mix(self.master_seed);
        for v in [self.alpha.to_bits(), self.p.to_bits(), self.l as u64, self.tag, self.realization] {
            h = mix(h ^ v);
        }
        let mut out = [0u8; 32];
        let mut s = h;
        for chunk in out.chunks_exact_mut(8) {
            s = mix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    fn histogram(l: usize, alpha: f64, draws: usize, seed: u64) -> Vec<usize> {
        let s = DistanceSampler::new(l, alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = vec![0usize; l / 2 + 1];
        for _ in 0..draws {
            let (i, j) = s.sample_pair(&mut rng);
            h[distance(i, j, l).unwrap()] += 1;
        }
        h
    }

    fn within_5_sigma(count: usize, draws: usize, prob: f64) -> bool {
        let mean = draws as f64 * prob;
        let sigma = (draws as f64 * prob * (1.0 - prob)).sqrt();
        (count as f64 - mean).abs() <= 5.0 * sigma
    }

    #[test]
    fn distances() {
        assert_eq!(distance(1, 4, 8).unwrap(), 3);
        assert_eq!(distance(0, 7, 8).unwrap(), 1);
        assert_eq!(distance(0, 4, 8).unwrap(), 4);
        assert!(distance(3, 3, 8).is_err());
    }

    #[test]
    fn nearest_neighbour_limit() {
        let h = histogram(16, 50.0, 100_000, 1);
        assert!(h[1] as f64 / 100_000.0 > 0.999);
    }

    #[test]
    fn uniform_distances_at_alpha_zero() {
        let draws = 1_000_000;
        let h = histogram(8, 0.0, draws, 2);
        for r in 1..=4 {
            assert!(within_5_sigma(h[r], draws, 0.25), "r={r}: {}", h[r]);
        }
    }

    #[test]
    fn inverse_square_distances() {
        let s = DistanceSampler::new(16, 2.0).unwrap();
        let norm: f64 = (1..=8).map(|x| 1.0 / (x * x) as f64).sum();
        assert!((norm - 1.527422052154195).abs() < 1e-12);
        assert!((s.normalization() - norm).abs() < 1e-12);
        let total: f64 = (1..=8).map(|r| s.probability(r)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let draws = 1_000_000;
        let h = histogram(16, 2.0, draws, 3);
        for r in 1..=8 {
            let p = 1.0 / (r * r) as f64 / norm;
            assert!(within_5_sigma(h[r], draws, p), "r={r}: {} vs {}", h[r], p * draws as f64);
        }
    }

    #[test]
    fn config_validation() {
        assert!(CircuitConfig::new(16, 2.0, 0.2, 100, 1, 0).is_ok());
        assert!(CircuitConfig::new(15, 2.0, 0.2, 100, 1, 0).is_err());
        assert!(CircuitConfig::new(16, -1.0, 0.2, 100, 1, 0).is_err());
        assert!(CircuitConfig::new(16, 2.0, 1.0, 100, 1, 0).is_err());
        assert!(CircuitConfig::new_allowing_full_measurement(16, 2.0, 1.0, 100, 1, 0).is_ok());
    }

    #[test]
    fn step_counts() {
        let cfg = CircuitConfig::new(32, 3.0, 0.25, 10, 4, 0).unwrap();
        let c = Circuit::new(&cfg, group()).unwrap();
        let mut t = Tableau::zero_state(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut measured = 0usize;
        for _ in 0..200 {
            let mut gates = 0;
            c.step_with(&mut t, &mut rng, |e| match e {
                Event::Gate { i, j, .. } => {
                    assert_ne!(i, j);
                    gates += 1;
                }
                Event::Measure { .. } => measured += 1,
            });
            assert_eq!(gates, 32);
        }
        // Binomial(200 * 32, 0.25)
        assert!(within_5_sigma(measured, 200 * 32, 0.25), "{measured}");
    }

    #[test]
    fn limits_of_measurement_rate() {
        let cfg = CircuitConfig::new_allowing_full_measurement(16, 2.0, 1.0, 10, 4, 0).unwrap();
        let c = Circuit::new(&cfg, group()).unwrap();
        let mut t = Tableau::zero_state(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            c.step(&mut t, &mut rng);
            for q in 0..16 {
                assert_eq!(t.entropy(&[q]), 0);
            }
            assert_eq!(t.entropy_range(0..8), 0);
        }

        let cfg = CircuitConfig::new(16, 2.0, 0.0, 10, 4, 0).unwrap();
        let c = Circuit::new(&cfg, group()).unwrap();
        c.step_with(&mut t, &mut rng, |e| assert!(matches!(e, Event::Gate { .. })));
    }

    #[test]
    fn seeded_replay() {
        let run = || {
            let cfg = CircuitConfig::new(24, 2.5, 0.2, 10, 99, 3).unwrap();
            let id = StreamId { master_seed: 99, alpha: 2.5, p: 0.2, l: 24, tag: 0, realization: 3 };
            let c = Circuit::new(&cfg, group()).unwrap();
            let mut t = Tableau::zero_state(24).unwrap();
            let mut rng = id.rng();
            for _ in 0..50 {
                c.step(&mut t, &mut rng);
            }
            t
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stream_ids_differ() {
        let base = StreamId { master_seed: 1, alpha: 4.0, p: 0.2, l: 64, tag: 0, realization: 0 };
        let seeds = [
            base.seed(),
            StreamId { tag: 1, ..base }.seed(),
            StreamId { realization: 1, ..base }.seed(),
            StreamId { p: 0.205, ..base }.seed(),
            StreamId { l: 32, ..base }.seed(),
        ];
        for a in 0..seeds.len() {
            for b in (a + 1)..seeds.len() {
                assert_ne!(seeds[a], seeds[b]);
            }
        }
    }

    #[test]
    fn volume_law_without_measurements() {
        let l = 64;
        let cfg = CircuitConfig::new(l, 4.0, 0.0, 10, 1, 0).unwrap();
        let c = Circuit::new(&cfg, group()).unwrap();
        let mut t = Tableau::zero_state(l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..2 * l {
            c.step(&mut t, &mut rng);
        }
        let s = t.entropy_range(0..l / 2);
        assert!(s + 4 >= l / 2 && s <= l / 2, "half-chain entropy {s}");
    }
}
