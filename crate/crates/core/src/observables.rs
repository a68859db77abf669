//! Partitions, conditional and tripartite mutual information, and the
//! steady-state sampling protocol.
//!
//! A steady-state estimate for one `(alpha, p, L, scheme)` cell runs in two
//! phases. A pilot of `pilot_realizations` trajectories samples the QCMI at
//! every step `t >= t_min`; the autocorrelation time of the ensemble-averaged
//! series fixes the sampling interval `delta_t`. The production run then
//! samples each of `R` fresh trajectories at `t_min + k * delta_t`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitConfig, StreamId};
use crate::cliffords::CliffordGroup;
use crate::error::{Error, Result};
use crate::scaling::chord_length;
use crate::stabilizer::Tableau;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// `|A| = |B| = |C| = L/4`.
    #[serde(rename = "a")]
    A,
    /// `|A| = |C| = 5L/16`, `|B| = L/4`.
    #[serde(rename = "b")]
    B,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::A, Scheme::B];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::A => "a",
            Scheme::B => "b",
        }
    }

    fn index(self) -> u64 {
        match self {
            Scheme::A => 0,
            Scheme::B => 1,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "A" => Ok(Scheme::A),
            "b" | "B" => Ok(Scheme::B),
            other => Err(Error::Parse(format!("unknown partition scheme {other:?}"))),
        }
    }
}

/// Contiguous blocks `A`, `B`, `C` laid out from site 0; `D` is the rest of
/// the ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    l: usize,
    scheme: Option<Scheme>,
    a: Range<usize>,
    b: Range<usize>,
    c: Range<usize>,
}

impl Partition {
    pub fn new(l: usize, scheme: Scheme) -> Result<Self> {
        let sizes = match scheme {
            Scheme::A if l > 0 && l % 4 == 0 => [l / 4, l / 4, l / 4],
            Scheme::B if l > 0 && l % 16 == 0 => [5 * l / 16, l / 4, 5 * l / 16],
            _ => {
                let m = if scheme == Scheme::A { 4 } else { 16 };
                return Err(Error::Config(format!("scheme {scheme} needs L divisible by {m}, got {l}")));
            }
        };
        let mut p = Self::custom(l, sizes)?;
        p.scheme = Some(scheme);
        Ok(p)
    }

    /// Arbitrary nonempty block sizes with a nonempty remainder `D`.
    pub fn custom(l: usize, sizes: [usize; 3]) -> Result<Self> {
        let [na, nb, nc] = sizes;
        if na == 0 || nb == 0 || nc == 0 || na + nb + nc >= l {
            return Err(Error::Config(format!("block sizes {sizes:?} do not fit a ring of {l} with D nonempty")));
        }
        Ok(Self { l, scheme: None, a: 0..na, b: na..na + nb, c: na + nb..na + nb + nc })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn scheme(&self) -> Option<Scheme> {
        self.scheme
    }

    pub fn a(&self) -> Range<usize> {
        self.a.clone()
    }

    pub fn b(&self) -> Range<usize> {
        self.b.clone()
    }

    pub fn c(&self) -> Range<usize> {
        self.c.clone()
    }

    pub fn d(&self) -> Range<usize> {
        self.c.end..self.l
    }

    pub fn ab(&self) -> Range<usize> {
        self.a.start..self.b.end
    }

    pub fn bc(&self) -> Range<usize> {
        self.b.start..self.c.end
    }

    pub fn abc(&self) -> Range<usize> {
        self.a.start..self.c.end
    }

    pub fn ac(&self) -> Vec<usize> {
        self.a().chain(self.c()).collect()
    }

    /// Sizes of `A`, `B`, `C`, `D`.
    pub fn sizes(&self) -> [usize; 4] {
        [self.a.len(), self.b.len(), self.c.len(), self.l - self.c.end]
    }
}

fn check_size(t: &Tableau, part: &Partition) {
    assert_eq!(t.num_qubits(), part.len(), "partition built for a different system size");
}

/// `I(A:C|B) = S_AB + S_BC - S_B - S_ABC` in bits.
pub fn qcmi(t: &Tableau, part: &Partition) -> i64 {
    check_size(t, part);
    let s = |r: Range<usize>| t.entropy_range(r) as i64;
    s(part.ab()) + s(part.bc()) - s(part.b()) - s(part.abc())
}

/// `S_A + S_B + S_C - S_AB - S_BC - S_AC - S_ABC` in bits.
pub fn tmi(t: &Tableau, part: &Partition) -> i64 {
    check_size(t, part);
    let s = |r: Range<usize>| t.entropy_range(r) as i64;
    s(part.a()) + s(part.b()) + s(part.c()) - s(part.ab()) - s(part.bc()) - t.entropy(&part.ac()) as i64 - s(part.abc())
}

/// Why an autocorrelation estimate fell back to `delta_t = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcfWarning {
    /// Zero variance; no correlation structure to fit.
    ConstantSeries,
    /// The fitted decay constant was not positive and finite.
    UnphysicalDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationTime {
    pub delta_t: usize,
    /// Fitted decay constant; 0 when no lag is correlated above threshold.
    pub tau: f64,
    /// Number of lags entering the fit.
    pub lags: usize,
    pub warning: Option<AcfWarning>,
}

pub const ACF_MIN_SAMPLES: usize = 32;
pub const ACF_THRESHOLD: f64 = 0.05;

/// Empirical autocorrelation at lags `1..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = dev.iter().map(|d| d * d).sum::<f64>();
    (1..=max_lag.min(n.saturating_sub(1)))
        .map(|k| dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / var)
        .collect()
}

/// `delta_t = ceil(tau)` from a log-linear fit of the autocorrelation over
/// the leading lags where it exceeds [`ACF_THRESHOLD`], up to `len / 4`.
pub fn estimate_autocorrelation_time(series: &[f64]) -> Result<AutocorrelationTime> {
    if series.len() < ACF_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "autocorrelation needs at least {ACF_MIN_SAMPLES} samples, got {}",
            series.len()
        )));
    }
    let fallback = |warning| AutocorrelationTime { delta_t: 1, tau: 0.0, lags: 0, warning };
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / series.len() as f64;
    if !(var > 1e-12 * mean.abs().max(1.0).powi(2)) {
        return Ok(fallback(Some(AcfWarning::ConstantSeries)));
    }
    let acf = autocorrelation(series, series.len() / 4);
    let pts: Vec<(f64, f64)> = acf
        .iter()
        .take_while(|&&r| r > ACF_THRESHOLD)
        .enumerate()
        .map(|(i, r)| ((i + 1) as f64, r.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(fallback(None));
    }
    let slope = if pts.len() == 1 {
        pts[0].1
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let tau = -1.0 / slope;
    if !(tau > 0.0) || !tau.is_finite() {
        return Ok(AutocorrelationTime { lags: pts.len(), ..fallback(Some(AcfWarning::UnphysicalDecay)) });
    }
    Ok(AutocorrelationTime { delta_t: (tau.ceil() as usize).max(1), tau, lags: pts.len(), warning: None })
}

/// Earliest steady-state time for a chain of `l` sites.
pub fn t_min_for(l: usize) -> usize {
    (2 * l).min(2048)
}

/// Largest `N_t` with `t_min + (N_t - 1) delta_t <= t_max`.
pub fn sample_count(t_min: usize, delta_t: usize, t_max: usize) -> usize {
    if t_max < t_min {
        0
    } else {
        (t_max - t_min) / delta_t + 1
    }
}

/// Protocol constants shared by every cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub t_max: usize,
    pub realizations: usize,
    pub pilot_realizations: usize,
}

impl Protocol {
    pub const DEFAULT_T_MAX: usize = 4096;
    pub const DEFAULT_REALIZATIONS: usize = 1000;
    pub const FULL_SCALE_REALIZATIONS: usize = 10560;
    pub const DEFAULT_PILOT: usize = 64;

    pub fn new(t_max: usize, realizations: usize) -> Self {
        Self { t_max, realizations, pilot_realizations: Self::DEFAULT_PILOT }
    }
}

impl Default for Protocol {
    fn default() -> Self {
        Self::new(Self::DEFAULT_T_MAX, Self::DEFAULT_REALIZATIONS)
    }
}

/// One point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub alpha: f64,
    pub p: f64,
    pub l: usize,
    pub scheme: Scheme,
}

/// Run phases, folded into the stream tag together with the scheme.
const PHASE_PRODUCTION: u64 = 0;
const PHASE_PILOT: u64 = 1 << 8;
const PHASE_PROFILE: u64 = 2 << 8;

impl Cell {
    fn stream(&self, seed: u64, phase: u64, realization: u64) -> StreamId {
        StreamId { master_seed: seed, alpha: self.alpha, p: self.p, l: self.l, tag: phase | self.scheme.index(), realization }
    }
}

/// Runs one trajectory from `|0...0>` to `t_max`, calling `sample` after
/// every step `t >= t_min` with `(t - t_min) % delta_t == 0`.
fn run_trajectory(
    alpha: f64,
    p: f64,
    l: usize,
    stream: StreamId,
    t_min: usize,
    delta_t: usize,
    t_max: usize,
    mut sample: impl FnMut(usize, &Tableau),
) -> Result<()> {
    let cfg = CircuitConfig::new_allowing_full_measurement(l, alpha, p, t_max, stream.master_seed, stream.realization)?;
    let circuit = Circuit::new(&cfg, CliffordGroup::shared())?;
    let mut rng = stream.rng();
    let mut state = Tableau::zero_state(l)?;
    if t_min == 0 {
        sample(0, &state);
    }
    for t in 1..=t_max {
        circuit.step(&mut state, &mut rng);
        if t >= t_min && (t - t_min) % delta_t == 0 {
            sample(t, &state);
        }
    }
    Ok(())
}

/// Per-realization QCMI samples with their sampling metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub realization: u64,
    pub t_min: usize,
    pub delta_t: usize,
    pub values: Vec<i64>,
}

impl ObservableSeries {
    pub fn n_t(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<i64>() as f64 / self.values.len() as f64
    }

    pub fn times(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).map(move |k| self.t_min + k * self.delta_t)
    }
}

/// QCMI series of one realization. The final state is also checked for
/// `S_ABC = S_D`.
pub fn qcmi_series(cell: &Cell, seed: u64, t_max: usize, delta_t: usize, realization: u64, pilot: bool) -> Result<ObservableSeries> {
    if delta_t == 0 {
        return Err(Error::Config("delta_t must be at least 1".into()));
    }
    let part = Partition::new(cell.l, cell.scheme)?;
    let t_min = t_min_for(cell.l);
    if t_max < t_min {
        return Err(Error::Config(format!("t_max = {t_max} is below t_min = {t_min}")));
    }
    let phase = if pilot { PHASE_PILOT } else { PHASE_PRODUCTION };
    let mut values = Vec::with_capacity(sample_count(t_min, delta_t, t_max));
    let mut last = 0;
    run_trajectory(cell.alpha, cell.p, cell.l, cell.stream(seed, phase, realization), t_min, delta_t, t_max, |t, state| {
        values.push(qcmi(state, &part));
        if t + delta_t > t_max {
            let abc: Vec<usize> = part.abc().collect();
            let d: Vec<usize> = part.d().collect();
            assert_eq!(state.entropy_direct(&abc), state.entropy_direct(&d), "complement symmetry broken");
        }
        last = t;
    })?;
    debug_assert!(last + delta_t > t_max);
    Ok(ObservableSeries { realization, t_min, delta_t, values })
}

/// Pilot estimate of the sampling interval for one cell.
pub fn pilot_delta_t(cell: &Cell, protocol: &Protocol, seed: u64) -> Result<AutocorrelationTime> {
    let r = protocol.pilot_realizations.max(1);
    let runs: Vec<ObservableSeries> = (0..r as u64)
        .into_par_iter()
        .map(|z| qcmi_series(cell, seed, protocol.t_max, 1, z, true))
        .collect::<Result<_>>()?;
    let len = runs[0].values.len();
    let mut avg = vec![0.0; len];
    for run in &runs {
        for (a, &v) in avg.iter_mut().zip(&run.values) {
            *a += v as f64;
        }
    }
    avg.iter_mut().for_each(|a| *a /= r as f64);
    estimate_autocorrelation_time(&avg)
}

/// Mean and standard error over per-realization averages, summed in
/// realization order.
fn ensemble_stats(means: &[f64]) -> (f64, Option<f64>) {
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    if means.len() < 2 {
        return (mean, None);
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, Some((var / r).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEstimate {
    pub alpha: f64,
    pub p: f64,
    pub l: usize,
    pub scheme: Scheme,
    pub mean: f64,
    /// `None` when fewer than two realizations were run.
    pub stderr: Option<f64>,
    pub realizations: usize,
    pub n_t: usize,
    pub delta_t: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub seed: u64,
    pub tau: f64,
    pub delta_t_warning: Option<AcfWarning>,
    /// Extremes over every individual sample.
    pub min_sample: i64,
    pub max_sample: i64,
}

/// Production run with a given sampling interval.
pub fn production_run(cell: &Cell, protocol: &Protocol, seed: u64, acf: &AutocorrelationTime) -> Result<SteadyStateEstimate> {
    if protocol.realizations == 0 {
        return Err(Error::Config("at least one realization is required".into()));
    }
    let t_min = t_min_for(cell.l);
    if protocol.t_max < t_min + acf.delta_t {
        return Err(Error::Config(format!(
            "t_max = {} must be at least t_min + delta_t = {}",
            protocol.t_max,
            t_min + acf.delta_t
        )));
    }
    let runs: Vec<(f64, i64, i64)> = (0..protocol.realizations as u64)
        .into_par_iter()
        .map(|z| {
            let s = qcmi_series(cell, seed, protocol.t_max, acf.delta_t, z, false)?;
            let lo = *s.values.iter().min().unwrap();
            let hi = *s.values.iter().max().unwrap();
            Ok((s.mean(), lo, hi))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (mean, stderr) = ensemble_stats(&means);
    Ok(SteadyStateEstimate {
        alpha: cell.alpha,
        p: cell.p,
        l: cell.l,
        scheme: cell.scheme,
        mean,
        stderr,
        realizations: protocol.realizations,
        n_t: sample_count(t_min, acf.delta_t, protocol.t_max),
        delta_t: acf.delta_t,
        t_min,
        t_max: protocol.t_max,
        seed,
        tau: acf.tau,
        delta_t_warning: acf.warning,
        min_sample: runs.iter().map(|r| r.1).min().unwrap(),
        max_sample: runs.iter().map(|r| r.2).max().unwrap(),
    })
}

/// Pilot followed by production.
pub fn steady_state_qcmi(cell: &Cell, protocol: &Protocol, seed: u64) -> Result<SteadyStateEstimate> {
    let acf = pilot_delta_t(cell, protocol, seed)?;
    production_run(cell, protocol, seed, &acf)
}

pub const CSV_HEADER: &str = "alpha,p,L,scheme,I_mean,I_stderr,R,N_t,delta_t,t_min,seed";

/// Shortest of fixed or scientific notation carrying 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let e: i32 = exp.parse().unwrap();
    if (-5..9).contains(&e) {
        let s = format!("{:.*}", (8 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{m}e{e}")
    }
}

impl SteadyStateEstimate {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            format_sig9(self.alpha),
            format_sig9(self.p),
            self.l,
            self.scheme,
            format_sig9(self.mean),
            format_sig9(self.stderr.unwrap_or(f64::NAN)),
            self.realizations,
            self.n_t,
            self.delta_t,
            self.t_min,
            self.seed
        )
    }
}

/// A subsystem of the entropy profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    AB,
    BC,
    D,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::AB, Region::BC, Region::D];

    pub fn label(self) -> &'static str {
        match self {
            Region::AB => "AB",
            Region::BC => "BC",
            Region::D => "D",
        }
    }

    pub fn range(self, part: &Partition) -> Range<usize> {
        match self {
            Region::AB => part.ab(),
            Region::BC => part.bc(),
            Region::D => part.d(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub scheme: Scheme,
    pub region: Region,
    pub size: usize,
    pub chord: f64,
    pub mean: f64,
    pub stderr: Option<f64>,
}

pub const PROFILE_CSV_HEADER: &str = "alpha,p,L,scheme,region,size,chord,S_mean,S_stderr,R,N_t,delta_t,t_min,seed";

/// Steady-state entropies of `AB`, `BC` and `D` for both schemes, sampled on
/// shared trajectories every `delta_t` steps. Requires `L % 16 == 0`.
pub fn entropy_profile(alpha: f64, p: f64, l: usize, protocol: &Protocol, seed: u64, delta_t: usize) -> Result<Vec<EntropySample>> {
    if delta_t == 0 || protocol.realizations == 0 {
        return Err(Error::Config("delta_t and the realization count must be positive".into()));
    }
    let parts = [Partition::new(l, Scheme::A)?, Partition::new(l, Scheme::B)?];
    let t_min = t_min_for(l);
    if protocol.t_max < t_min + delta_t {
        return Err(Error::Config(format!("t_max = {} must be at least t_min + delta_t", protocol.t_max)));
    }
    let n_t = sample_count(t_min, delta_t, protocol.t_max) as f64;
    let cell = Cell { alpha, p, l, scheme: Scheme::A };
    let per_run: Vec<[f64; 6]> = (0..protocol.realizations as u64)
        .into_par_iter()
        .map(|z| {
            let mut acc = [0u64; 6];
            run_trajectory(alpha, p, l, cell.stream(seed, PHASE_PROFILE, z), t_min, delta_t, protocol.t_max, |_, st| {
                for (pi, part) in parts.iter().enumerate() {
                    for (ri, region) in Region::ALL.iter().enumerate() {
                        acc[3 * pi + ri] += st.entropy_range(region.range(part)) as u64;
                    }
                }
            })?;
            Ok(acc.map(|s| s as f64 / n_t))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(6);
    for (pi, part) in parts.iter().enumerate() {
        for (ri, region) in Region::ALL.iter().enumerate() {
            let means: Vec<f64> = per_run.iter().map(|r| r[3 * pi + ri]).collect();
            let (mean, stderr) = ensemble_stats(&means);
            let size = region.range(part).len();
            out.push(EntropySample {
                scheme: part.scheme().unwrap(),
                region: *region,
                size,
                chord: chord_length(l, size)?,
                mean,
                stderr,
            });
        }
    }
    Ok(out)
}
