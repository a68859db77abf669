//! Finite-size scaling: data collapse, bootstrap errors, extrapolation in
//! `1/L_min`, crossing points, correction-to-scaling fits and entropy
//! log-fits.
//!
//! The collapse assumes `I(p, L) = f((p - p_c) L^(1/nu))` with an unknown
//! smooth `f` modelled as a Gaussian process. `(p_c, nu)` and the kernel
//! hyperparameters maximize the marginal likelihood of the rescaled data.

use std::collections::BTreeSet;
use std::f64::consts::{LN_2, PI};

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{Partition, Scheme, SteadyStateEstimate, CSV_HEADER};

/// Percolation value of `nu`, quoted for comparison only.
pub const PERCOLATION_NU: f64 = 4.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub alpha: f64,
    pub scheme: Scheme,
    pub l: usize,
    pub p: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Steady-state means keyed by `(alpha, scheme, L, p)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    points: Vec<DataPoint>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl ScalingDataset {
    pub fn new(mut points: Vec<DataPoint>) -> Result<Self> {
        for d in &points {
            if !(d.p.is_finite() && d.mean.is_finite() && d.alpha.is_finite()) {
                return Err(Error::Parse(format!("non-finite value in {d:?}")));
            }
            if !(d.stderr >= 0.0 && d.stderr.is_finite()) {
                return Err(Error::Parse(format!("standard error must be finite and >= 0 in {d:?}")));
            }
            if d.l == 0 {
                return Err(Error::Parse("system size 0".into()));
            }
        }
        points.sort_by(|a, b| {
            (a.alpha, a.scheme, a.l).partial_cmp(&(b.alpha, b.scheme, b.l)).unwrap().then(a.p.total_cmp(&b.p))
        });
        for w in points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if same(a.alpha, b.alpha) && a.scheme == b.scheme && a.l == b.l && same(a.p, b.p) {
                return Err(Error::Parse(format!("duplicate entry at alpha={} scheme={} L={} p={}", a.alpha, a.scheme, a.l, a.p)));
            }
        }
        Ok(Self { points })
    }

    pub fn from_estimates(est: &[SteadyStateEstimate]) -> Result<Self> {
        Self::new(
            est.iter()
                .map(|e| DataPoint {
                    alpha: e.alpha,
                    scheme: e.scheme,
                    l: e.l,
                    p: e.p,
                    mean: e.mean,
                    stderr: e.stderr.unwrap_or(f64::NAN),
                })
                .collect(),
        )
    }

    /// Parses the steady-state CSV written by the simulator.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty results file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let idx = |name: &str| {
            cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse(format!("missing column {name}; expected {CSV_HEADER}")))
        };
        let (ia, ip, il, is, im, ie) = (idx("alpha")?, idx("p")?, idx("L")?, idx("scheme")?, idx("I_mean")?, idx("I_stderr")?);
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != cols.len() {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", n + 2, f.len(), cols.len())));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {:?}: {e}", n + 2, f[i])));
            points.push(DataPoint {
                alpha: num(ia)?,
                p: num(ip)?,
                l: f[il].parse().map_err(|e| Error::Parse(format!("row {}: L: {e}", n + 2)))?,
                scheme: f[is].parse()?,
                mean: num(im)?,
                stderr: num(ie)?,
            });
        }
        if points.is_empty() {
            return Err(Error::InsufficientData("results file has no rows".into()));
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct `(alpha, scheme)` groups.
    pub fn groups(&self) -> Vec<(f64, Scheme)> {
        let mut out: Vec<(f64, Scheme)> = Vec::new();
        for d in &self.points {
            if !out.iter().any(|g| same(g.0, d.alpha) && g.1 == d.scheme) {
                out.push((d.alpha, d.scheme));
            }
        }
        out
    }

    pub fn select(&self, alpha: f64, scheme: Scheme) -> Self {
        Self { points: self.points.iter().filter(|d| same(d.alpha, alpha) && d.scheme == scheme).copied().collect() }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.points.iter().map(|d| d.l).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Points of one size in increasing `p`.
    pub fn curve(&self, l: usize) -> Vec<DataPoint> {
        self.points.iter().filter(|d| d.l == l).copied().collect()
    }

    pub fn window(&self, l_min: usize, l_max: usize) -> Self {
        Self { points: self.points.iter().filter(|d| (l_min..=l_max).contains(&d.l)).copied().collect() }
    }

    fn with_means(&self, means: &[f64]) -> Self {
        let points = self.points.iter().zip(means).map(|(d, &m)| DataPoint { mean: m, ..*d }).collect();
        Self { points }
    }

    fn single_group(&self) -> Result<()> {
        if self.groups().len() > 1 {
            return Err(Error::Contract("dataset mixes several (alpha, scheme) groups; select one first".into()));
        }
        Ok(())
    }

    /// Draws every mean from `Normal(mean, stderr)`.
    fn resample(&self, rng: &mut ChaCha8Rng) -> Self {
        let means: Vec<f64> = self
            .points
            .iter()
            .map(|d| if d.stderr > 0.0 { Normal::new(d.mean, d.stderr).unwrap().sample(rng) } else { d.mean })
            .collect();
        self.with_means(&means)
    }
}

/// Nelder-Mead from `x0` with initial steps `step`.
fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64], max_iters: u64, tol: f64) -> Result<(Vec<f64>, f64, bool)> {
    struct Cost<F>(F);
    impl<F: Fn(&[f64]) -> f64> CostFunction for Cost<F> {
        type Param = Vec<f64>;
        type Output = f64;
        fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
            Ok((self.0)(p))
        }
    }
    let mut simplex = vec![x0.to_vec()];
    for (i, s) in step.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(tol).map_err(|e| Error::Fit(e.to_string()))?;
    let res = Executor::new(Cost(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| Error::Fit(e.to_string()))?;
    let state = res.state();
    let best = state.get_best_param().cloned().ok_or_else(|| Error::Fit("optimizer returned no parameters".into()))?;
    let converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));
    Ok((best, state.get_best_cost(), converged))
}

/// Rescaled collapse data ready for the GP likelihood.
struct CollapseProblem {
    p: Vec<f64>,
    inv_l: Vec<f64>,
    y: DVector<f64>,
    s2: Vec<f64>,
    p_lo: f64,
    p_hi: f64,
}

const NU_RANGE: (f64, f64) = (0.1, 10.0);

impl CollapseProblem {
    fn new(ds: &ScalingDataset) -> Result<Self> {
        let pts = ds.points();
        let n = pts.len() as f64;
        let ym = pts.iter().map(|d| d.mean).sum::<f64>() / n;
        let ysd = (pts.iter().map(|d| (d.mean - ym).powi(2)).sum::<f64>() / n).sqrt();
        if !(ysd > 1e-12 * ym.abs().max(1.0)) {
            return Err(Error::InsufficientData("all observable values are equal".into()));
        }
        Ok(Self {
            p: pts.iter().map(|d| d.p).collect(),
            inv_l: pts.iter().map(|d| (d.l as f64).ln()).collect(),
            y: DVector::from_iterator(pts.len(), pts.iter().map(|d| (d.mean - ym) / ysd)),
            s2: pts.iter().map(|d| (d.stderr / ysd).powi(2)).collect(),
            p_lo: pts.iter().map(|d| d.p).fold(f64::INFINITY, f64::min),
            p_hi: pts.iter().map(|d| d.p).fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Rescaled abscissae, min-max normalized to `[-1, 1]`.
    fn xs(&self, p_c: f64, nu: f64) -> Vec<f64> {
        let x: Vec<f64> = self.p.iter().zip(&self.inv_l).map(|(p, ln_l)| (p - p_c) * (ln_l / nu).exp()).collect();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-300);
        x.iter().map(|v| 2.0 * (v - lo) / span - 1.0).collect()
    }

    /// Negative log marginal likelihood for
    /// `theta = [p_c, ln nu, ln sigma_f, ln ell, ln sigma_n]`.
    fn nll(&self, th: &[f64]) -> f64 {
        let (p_c, nu) = (th[0], th[1].exp());
        let penalty = |v: f64, lo: f64, hi: f64| if v < lo { lo - v } else if v > hi { v - hi } else { 0.0 };
        let out = penalty(p_c, self.p_lo, self.p_hi)
            + penalty(nu, NU_RANGE.0, NU_RANGE.1)
            + penalty(th[2], -6.0, 4.0)
            + penalty(th[3], -6.0, 3.0)
            + penalty(th[4], -12.0, 1.0);
        if out > 0.0 {
            return 1e8 * (1.0 + out);
        }
        gp_nll(&self.xs(p_c, nu), &self.y, &self.s2, th[2].exp(), th[3].exp(), th[4].exp())
    }
}

fn gp_nll(x: &[f64], y: &DVector<f64>, s2: &[f64], sf: f64, ell: f64, sn: f64) -> f64 {
    let n = x.len();
    let (sf2, inv2l2, sn2) = (sf * sf, 0.5 / (ell * ell), sn * sn);
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d = x[i] - x[j];
        sf2 * (-d * d * inv2l2).exp() + if i == j { s2[i] + sn2 + 1e-10 } else { 0.0 }
    });
    let Some(chol) = k.cholesky() else {
        return 1e8;
    };
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l_dirty().diagonal().iter().take(n).map(|v| v.ln()).sum();
    0.5 * y.dot(&alpha) + logdet + 0.5 * n as f64 * (2.0 * PI).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub p_c: f64,
    pub nu: f64,
    pub sigma_f: f64,
    pub length: f64,
    pub noise: f64,
    pub log_likelihood: f64,
    pub l_min: usize,
    pub l_max: usize,
    pub converged: bool,
    pub p_c_err: Option<f64>,
    pub nu_err: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseOptions {
    pub restarts: usize,
    pub max_iters: u64,
    /// Starting guess for `nu`.
    pub nu_guess: f64,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self { restarts: 8, max_iters: 4000, nu_guess: 1.3 }
    }
}

fn collapse_window(ds: &ScalingDataset, l_min: usize, l_max: usize) -> Result<ScalingDataset> {
    ds.single_group()?;
    let w = ds.window(l_min, l_max);
    let sizes = w.sizes();
    if sizes.len() < 3 {
        return Err(Error::InsufficientData(format!("collapse needs >= 3 sizes in [{l_min}, {l_max}], found {sizes:?}")));
    }
    for &l in &sizes {
        if w.curve(l).len() < 5 {
            return Err(Error::InsufficientData(format!("collapse needs >= 5 p-points at L = {l}")));
        }
    }
    Ok(w)
}

/// Maximum-likelihood collapse over sizes in `[l_min, l_max]`.
pub fn collapse_fit(ds: &ScalingDataset, l_min: usize, l_max: usize) -> Result<CollapseFit> {
    collapse_fit_with(ds, l_min, l_max, &CollapseOptions::default())
}

pub fn collapse_fit_with(ds: &ScalingDataset, l_min: usize, l_max: usize, opts: &CollapseOptions) -> Result<CollapseFit> {
    let w = collapse_window(ds, l_min, l_max)?;
    let prob = CollapseProblem::new(&w)?;
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|k| {
            let frac = (k as f64 + 0.5) / opts.restarts.max(1) as f64;
            let p0 = prob.p_lo + (0.25 + 0.5 * frac) * (prob.p_hi - prob.p_lo);
            let nu0 = opts.nu_guess * [1.0, 0.75, 1.35][k % 3];
            vec![p0, nu0.ln(), 0.0, (0.5f64).ln(), (0.05f64).ln()]
        })
        .collect();
    fit_from_starts(&prob, &starts, opts.max_iters, l_min, l_max)
}

fn fit_from_starts(prob: &CollapseProblem, starts: &[Vec<f64>], max_iters: u64, l_min: usize, l_max: usize) -> Result<CollapseFit> {
    let dp = 0.1 * (prob.p_hi - prob.p_lo);
    let step = [dp, 0.2, 0.5, 0.5, 1.0];
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in starts {
        let (x, _, conv) = minimize(|th| prob.nll(th), s, &step, max_iters, 1e-9)?;
        // polish from the best vertex with a fresh simplex
        let (x, fx, conv2) = minimize(|th| prob.nll(th), &x, &step.map(|v| 0.1 * v), max_iters, 1e-10)?;
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx, conv || conv2));
        }
    }
    let (th, fx, converged) = best.unwrap();
    if fx >= 1e8 {
        return Err(Error::Fit("collapse likelihood never became finite".into()));
    }
    Ok(CollapseFit {
        p_c: th[0],
        nu: th[1].exp(),
        sigma_f: th[2].exp(),
        length: th[3].exp(),
        noise: th[4].exp(),
        log_likelihood: -fx,
        l_min,
        l_max,
        converged,
        p_c_err: None,
        nu_err: None,
    })
}

/// Collapsed coordinates `(x, y, L)` with `x = (p - p_c) L^(1/nu)`.
pub fn collapsed_coordinates(ds: &ScalingDataset, fit: &CollapseFit) -> Vec<(f64, f64, usize)> {
    ds.window(fit.l_min, fit.l_max)
        .points()
        .iter()
        .map(|d| ((d.p - fit.p_c) * (d.l as f64).powf(1.0 / fit.nu), d.mean, d.l))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub fit: CollapseFit,
    pub p_c_sd: f64,
    pub nu_sd: f64,
    pub resamples: usize,
    pub failures: usize,
    /// More than 10% of refits failed.
    pub flagged: bool,
}

/// Parametric bootstrap: every resample redraws each mean from
/// `Normal(mean, stderr)` and refits from the point estimate.
pub fn bootstrap_collapse(ds: &ScalingDataset, l_min: usize, l_max: usize, resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if resamples < 100 {
        return Err(Error::Config(format!("bootstrap needs at least 100 resamples, got {resamples}")));
    }
    let fit = collapse_fit(ds, l_min, l_max)?;
    let w = collapse_window(ds, l_min, l_max)?;
    let start = vec![fit.p_c, fit.nu.ln(), fit.sigma_f.ln(), fit.length.ln(), fit.noise.ln()];
    let refits: Vec<Option<(f64, f64)>> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let r = w.resample(&mut rng);
            let prob = CollapseProblem::new(&r).ok()?;
            fit_from_starts(&prob, std::slice::from_ref(&start), 4000, l_min, l_max).ok().map(|f| (f.p_c, f.nu))
        })
        .collect();
    let ok: Vec<(f64, f64)> = refits.iter().flatten().copied().collect();
    let failures = resamples - ok.len();
    if ok.len() < 2 {
        return Err(Error::Fit("every bootstrap refit failed".into()));
    }
    let sd = |v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let p_c_sd = sd(ok.iter().map(|v| v.0).collect());
    let nu_sd = sd(ok.iter().map(|v| v.1).collect());
    Ok(BootstrapSummary {
        fit: CollapseFit { p_c_err: Some(p_c_sd), nu_err: Some(nu_sd), ..fit },
        p_c_sd,
        nu_sd,
        resamples,
        failures,
        flagged: failures * 10 > resamples,
    })
}

/// Weighted linear least squares. Returns `(coefficients, covariance, chi2)`.
/// Zero or missing weights fall back to an unweighted fit with the
/// covariance scaled by the residual variance.
pub fn wls(design: &DMatrix<f64>, y: &[f64], sigma: Option<&[f64]>) -> Result<(Vec<f64>, DMatrix<f64>, f64)> {
    let (n, k) = design.shape();
    if n < k || y.len() != n {
        return Err(Error::InsufficientData(format!("{n} points for {k} parameters")));
    }
    let weighted = sigma.filter(|s| s.len() == n && s.iter().all(|&v| v > 0.0 && v.is_finite()));
    let w: Vec<f64> = match weighted {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; n],
    };
    let a = DMatrix::from_fn(n, k, |i, j| design[(i, j)] * w[i]);
    let b = DVector::from_iterator(n, y.iter().zip(&w).map(|(v, wi)| v * wi));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::InsufficientData("design matrix is rank deficient".into()));
    }
    let coef = svd.solve(&b, 1e-14 * smax).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &a * &coef - &b;
    let chi2 = resid.norm_squared();
    let ata = a.transpose() * &a;
    let mut cov = ata.try_inverse().ok_or_else(|| Error::Fit("singular normal matrix".into()))?;
    if weighted.is_none() {
        let dof = (n - k).max(1) as f64;
        cov *= chi2 / dof;
    }
    Ok((coef.iter().copied().collect(), cov, chi2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub p_c: f64,
    pub p_c_err: f64,
    pub nu: f64,
    pub nu_err: f64,
}

/// Linear fit of `p_c` and `nu` against `1/L_min` over the four largest
/// `L_min`, evaluated at `1/L_min = 0`.
pub fn lmin_extrapolate(fits: &[CollapseFit]) -> Result<Extrapolation> {
    if fits.len() < 4 {
        return Err(Error::InsufficientData(format!("extrapolation needs >= 4 L_min values, got {}", fits.len())));
    }
    let mut sorted = fits.to_vec();
    sorted.sort_by_key(|f| f.l_min);
    let top = &sorted[sorted.len() - 4..];
    let design = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { 1.0 / top[i].l_min as f64 });
    let one = |vals: Vec<f64>, errs: Option<Vec<f64>>| -> Result<(f64, f64)> {
        let (c, cov, _) = wls(&design, &vals, errs.as_deref())?;
        Ok((c[0], cov[(0, 0)].max(0.0).sqrt()))
    };
    let errs = |f: fn(&CollapseFit) -> Option<f64>| top.iter().map(f).collect::<Option<Vec<f64>>>();
    let (p_c, p_c_err) = one(top.iter().map(|f| f.p_c).collect(), errs(|f| f.p_c_err))?;
    let (nu, nu_err) = one(top.iter().map(|f| f.nu).collect(), errs(|f| f.nu_err))?;
    Ok(Extrapolation { p_c, p_c_err, nu, nu_err })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    /// Smaller size of the pair `(L, 2L)`.
    pub l: usize,
    pub p_cross: f64,
    pub i_cross: f64,
    pub p_err: Option<f64>,
    pub i_err: Option<f64>,
    /// Several sign changes were found; the one nearest the reference was used.
    pub ambiguous: bool,
}

/// Grid points per local polynomial fit.
pub const CROSSING_WINDOW: usize = 7;

fn poly_fit(p: &[f64], y: &[f64], s: &[f64], center: f64, scale: f64, degree: usize) -> Result<Vec<f64>> {
    let design = DMatrix::from_fn(p.len(), degree + 1, |i, j| ((p[i] - center) / scale).powi(j as i32));
    Ok(wls(&design, y, Some(s))?.0)
}

fn poly_eval(c: &[f64], p: f64, center: f64, scale: f64) -> f64 {
    let u = (p - center) / scale;
    c.iter().rev().fold(0.0, |acc, v| acc * u + v)
}

/// Crossing of two curves sampled on a shared `p` grid. `near` selects
/// among several sign changes.
fn crossing_of(small: &[DataPoint], large: &[DataPoint], near: Option<f64>) -> Result<(f64, f64, bool)> {
    let mut grid = Vec::new();
    for a in small {
        if let Some(b) = large.iter().find(|b| same(a.p, b.p)) {
            grid.push((a.p, a.mean, a.stderr, b.mean, b.stderr));
        }
    }
    if grid.len() < 4 {
        return Err(Error::InsufficientData(format!("only {} shared p values", grid.len())));
    }
    let diff: Vec<f64> = grid.iter().map(|g| g.1 - g.3).collect();
    let changes: Vec<usize> = (0..grid.len() - 1).filter(|&k| diff[k] == 0.0 || diff[k].signum() != diff[k + 1].signum()).collect();
    if changes.is_empty() {
        return Err(Error::NoCrossing(format!("I(L) - I(2L) keeps one sign on p in [{}, {}]", grid[0].0, grid[grid.len() - 1].0)));
    }
    let k = match near {
        Some(pc) => *changes
            .iter()
            .min_by(|&&a, &&b| {
                let da = (0.5 * (grid[a].0 + grid[a + 1].0) - pc).abs();
                let db = (0.5 * (grid[b].0 + grid[b + 1].0) - pc).abs();
                da.total_cmp(&db)
            })
            .unwrap(),
        None => changes[0],
    };
    let n = grid.len();
    let w = CROSSING_WINDOW.min(n);
    let start = (k + 1).saturating_sub(w / 2).min(n - w);
    let win = &grid[start..start + w];
    let ps: Vec<f64> = win.iter().map(|g| g.0).collect();
    let center = 0.5 * (ps[0] + ps[w - 1]);
    let scale = 0.5 * (ps[w - 1] - ps[0]);
    let degree = 3.min(w - 1);
    let c_small = poly_fit(&ps, &win.iter().map(|g| g.1).collect::<Vec<_>>(), &win.iter().map(|g| g.2).collect::<Vec<_>>(), center, scale, degree)?;
    let c_large = poly_fit(&ps, &win.iter().map(|g| g.3).collect::<Vec<_>>(), &win.iter().map(|g| g.4).collect::<Vec<_>>(), center, scale, degree)?;
    let h = |p: f64| poly_eval(&c_small, p, center, scale) - poly_eval(&c_large, p, center, scale);
    // bracket: the grid interval, widened to the window if the smoothed
    // difference does not change sign there
    let (mut lo, mut hi) = (grid[k].0, grid[k + 1].0);
    if h(lo).signum() == h(hi).signum() && h(lo) != 0.0 {
        let mut found = None;
        for pair in ps.windows(2) {
            if h(pair[0]).signum() != h(pair[1]).signum() {
                let mid = 0.5 * (pair[0] + pair[1]);
                if found.is_none_or(|(a, b): (f64, f64)| (mid - 0.5 * (lo + hi)).abs() < (0.5 * (a + b) - 0.5 * (lo + hi)).abs()) {
                    found = Some((pair[0], pair[1]));
                }
            }
        }
        (lo, hi) = found.ok_or_else(|| Error::NoCrossing("smoothed curves do not cross inside the window".into()))?;
    }
    let mut h_lo = h(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if hm == 0.0 || hi - lo < 1e-15 {
            lo = mid;
            hi = mid;
            break;
        }
        if hm.signum() == h_lo.signum() {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let i = 0.5 * (poly_eval(&c_small, root, center, scale) + poly_eval(&c_large, root, center, scale));
    Ok((root, i, changes.len() > 1))
}

/// Crossing of `I(p, L)` and `I(p, 2L)` from cubic fits in a window of
/// [`CROSSING_WINDOW`] grid points around the sign change, with parametric
/// bootstrap errors when `resamples > 0`.
pub fn find_crossing(ds: &ScalingDataset, l: usize, near: Option<f64>, resamples: usize, seed: u64) -> Result<CrossingPoint> {
    ds.single_group()?;
    let (small, large) = (ds.curve(l), ds.curve(2 * l));
    if small.is_empty() || large.is_empty() {
        return Err(Error::InsufficientData(format!("need both L = {l} and 2L = {}", 2 * l)));
    }
    let (p_cross, i_cross, ambiguous) = crossing_of(&small, &large, near)?;
    let (mut p_err, mut i_err) = (None, None);
    if resamples > 0 {
        let pair = ScalingDataset { points: small.iter().chain(&large).copied().collect() };
        let draws: Vec<(f64, f64)> = (0..resamples as u64)
            .into_par_iter()
            .filter_map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (l as u64).rotate_left(32) ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let r = pair.resample(&mut rng);
                crossing_of(&r.curve(l), &r.curve(2 * l), Some(p_cross)).ok().map(|c| (c.0, c.1))
            })
            .collect();
        if draws.len() >= 2 {
            let sd = |v: Vec<f64>| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            };
            p_err = Some(sd(draws.iter().map(|d| d.0).collect()));
            i_err = Some(sd(draws.iter().map(|d| d.1).collect()));
        }
    }
    Ok(CrossingPoint { l, p_cross, i_cross, p_err, i_err, ambiguous })
}

/// All crossings `(L, 2L)` available in a single-group dataset.
pub fn all_crossings(ds: &ScalingDataset, near: Option<f64>, resamples: usize, seed: u64) -> Vec<(usize, Result<CrossingPoint>)> {
    let sizes = ds.sizes();
    sizes
        .iter()
        .filter(|&&l| sizes.contains(&(2 * l)))
        .map(|&l| (l, find_crossing(ds, l, near, resamples, seed)))
        .collect()
}

/// Which correction terms enter the crossing-point fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionModel {
    /// `omega2 = 2 omega1`.
    Constrained,
    /// Leading correction only.
    SingleTerm,
    /// `omega2` searched independently of `omega1`.
    FreeOmega2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFit {
    pub model: CorrectionModel,
    pub omega1: f64,
    pub omega2: Option<f64>,
    pub a1: f64,
    pub a2: f64,
    pub chi2: f64,
    /// Range of `omega1` with `chi2 <= chi2_min + 1` on the search grid.
    pub omega1_interval: (f64, f64),
    /// The interval reaches the edge of the search range.
    pub unidentifiable: bool,
}

pub const OMEGA_RANGE: (f64, f64) = (0.02, 5.0);
const OMEGA_GRID: usize = 500;

fn omega_grid() -> Vec<f64> {
    let (lo, hi) = OMEGA_RANGE;
    (0..OMEGA_GRID).map(|i| lo + (hi - lo) * i as f64 / (OMEGA_GRID - 1) as f64).collect()
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..100 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// `p_x(L) = p_c + a1 L^(-1/nu - omega1) + a2 L^(-1/nu - omega2)` with
/// `(p_c, nu)` held fixed. Needs at least four crossing points.
pub fn fit_crossing_p(points: &[CrossingPoint], p_c: f64, nu: f64, model: CorrectionModel) -> Result<CorrectionFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("correction fit needs >= 4 crossing points, got {}", points.len())));
    }
    let ls: Vec<f64> = points.iter().map(|c| c.l as f64).collect();
    let y: Vec<f64> = points.iter().map(|c| c.p_cross - p_c).collect();
    let errs: Option<Vec<f64>> = points.iter().map(|c| c.p_err).collect();
    let chi = |w1: f64, w2: Option<f64>| -> Option<(f64, f64, f64)> {
        let cols = if w2.is_some() { 2 } else { 1 };
        let design = DMatrix::from_fn(ls.len(), cols, |i, j| {
            let w = if j == 0 { w1 } else { w2.unwrap() };
            ls[i].powf(-1.0 / nu - w)
        });
        let (c, _, chi2) = wls(&design, &y, errs.as_deref()).ok()?;
        Some((chi2, c[0], c.get(1).copied().unwrap_or(0.0)))
    };
    let grid = omega_grid();
    let second = |w1: f64| -> Option<f64> {
        match model {
            CorrectionModel::Constrained => Some(2.0 * w1),
            CorrectionModel::SingleTerm => None,
            CorrectionModel::FreeOmega2 => None,
        }
    };
    let (omega1, omega2) = if model == CorrectionModel::FreeOmega2 {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &w1 in &grid {
            for &w2 in grid.iter().filter(|&&w2| w2 > w1 + 0.02) {
                if let Some((c, ..)) = chi(w1, Some(w2)) {
                    if c < best.0 {
                        best = (c, w1, w2);
                    }
                }
            }
        }
        if !best.0.is_finite() {
            return Err(Error::Fit("no admissible (omega1, omega2) pair".into()));
        }
        (best.1, Some(best.2))
    } else {
        let scan: Vec<(f64, f64)> = grid.iter().filter_map(|&w| chi(w, second(w)).map(|c| (w, c.0))).collect();
        if scan.is_empty() {
            return Err(Error::Fit("correction fit singular for every omega1".into()));
        }
        // refine every local minimum; among equally good ones keep the
        // smallest second amplitude, so nested data picks the nested model
        let cost = |w: f64| chi(w, second(w)).map_or(f64::INFINITY, |c| c.0);
        let mut minima: Vec<(f64, f64, f64)> = (0..scan.len())
            .filter(|&k| (k == 0 || scan[k].1 <= scan[k - 1].1) && (k + 1 == scan.len() || scan[k].1 <= scan[k + 1].1))
            .filter_map(|k| {
                let w = golden(cost, scan[k.saturating_sub(1)].0, scan[(k + 1).min(scan.len() - 1)].0);
                chi(w, second(w)).map(|c| (w, c.0, c.2.abs()))
            })
            .collect();
        let best = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        minima.retain(|m| m.1 <= best + 1e-8 * (1.0 + best));
        let w = minima.iter().min_by(|a, b| a.2.total_cmp(&b.2)).map(|m| m.0).ok_or_else(|| Error::Fit("no finite chi-square".into()))?;
        (w, second(w))
    };
    let (chi2, a1, a2) = chi(omega1, omega2).ok_or_else(|| Error::Fit("singular fit at optimum".into()))?;
    let inside: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&w| {
            let w2 = if model == CorrectionModel::FreeOmega2 { omega2.map(|v| v.max(w + 0.02)) } else { second(w) };
            chi(w, w2).is_some_and(|c| c.0 <= chi2 + 1.0)
        })
        .collect();
    let interval = (
        inside.first().copied().unwrap_or(omega1).min(omega1),
        inside.last().copied().unwrap_or(omega1).max(omega1),
    );
    let unidentifiable = interval.0 <= grid[0] || interval.1 >= grid[grid.len() - 1];
    Ok(CorrectionFit { model, omega1, omega2, a1, a2, chi2, omega1_interval: interval, unidentifiable })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterceptFit {
    pub c_over_3: f64,
    pub c_over_3_err: f64,
    pub b1: f64,
    pub b2: f64,
    pub chi2: f64,
    /// Factor the crossing values were divided by.
    pub geometric_factor: f64,
}

/// `I_x(L) / g = c/3 + b1 L^-omega1 + b2 L^-2 omega1`, `g` the scheme's
/// geometric factor.
pub fn fit_crossing_i(points: &[CrossingPoint], omega1: f64, scheme: Scheme) -> Result<InterceptFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("intercept fit needs >= 3 crossing points, got {}", points.len())));
    }
    let g = geometric_factor(scheme)?;
    let design = DMatrix::from_fn(points.len(), 3, |i, j| (points[i].l as f64).powf(-(j as f64) * omega1));
    let y: Vec<f64> = points.iter().map(|c| c.i_cross / g).collect();
    let errs: Option<Vec<f64>> = points.iter().map(|c| c.i_err.map(|e| e / g)).collect();
    let (c, cov, chi2) = wls(&design, &y, errs.as_deref())?;
    Ok(InterceptFit { c_over_3: c[0], c_over_3_err: cov[(0, 0)].max(0.0).sqrt(), b1: c[1], b2: c[2], chi2, geometric_factor: g })
}

/// `(L / pi) sin(pi size / L)`.
pub fn chord_length(l: usize, size: usize) -> Result<f64> {
    if size == 0 || size >= l {
        return Err(Error::Contract(format!("chord length needs 0 < size < L, got size {size} for L {l}")));
    }
    Ok(l as f64 / PI * (PI * size as f64 / l as f64).sin())
}

/// `log2[ l_AB l_BC / (l_B l_ABC) ]` in chord lengths, the factor that
/// multiplies `c/3` in the critical QCMI of a partition scheme.
pub fn geometric_factor(scheme: Scheme) -> Result<f64> {
    let part = Partition::new(16, scheme)?;
    let theta = |r: std::ops::Range<usize>| PI * r.len() as f64 / part.len() as f64;
    // sin a sin b = (cos(a - b) - cos(a + b)) / 2 keeps exact cases exact;
    // the L / pi prefactors cancel between numerator and denominator
    let sin_prod = |a: f64, b: f64| 0.5 * ((a - b).cos() - (a + b).cos());
    let num = sin_prod(theta(part.ab()), theta(part.bc()));
    let den = sin_prod(theta(part.b()), theta(part.abc()));
    Ok((num / den).log2())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyFit {
    pub c_over_3: f64,
    pub c_over_3_err: f64,
    pub offset: f64,
    pub offset_err: f64,
    pub chi2: f64,
}

/// Weighted fit of `S = (c/3) log2(chord) + c'` over `(chord, S, stderr)`.
pub fn fit_entropy_log(samples: &[(f64, f64, f64)]) -> Result<EntropyFit> {
    let mut distinct: Vec<f64> = Vec::new();
    for s in samples {
        if !(s.0 > 0.0) {
            return Err(Error::Contract(format!("chord length must be positive, got {}", s.0)));
        }
        if !distinct.iter().any(|&d| same(d, s.0)) {
            distinct.push(s.0);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!("entropy fit needs >= 3 distinct chord lengths, got {}", distinct.len())));
    }
    let design = DMatrix::from_fn(samples.len(), 2, |i, j| if j == 0 { samples[i].0.log2() } else { 1.0 });
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let errs: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let (c, cov, chi2) = wls(&design, &y, Some(&errs))?;
    Ok(EntropyFit {
        c_over_3: c[0],
        c_over_3_err: cov[(0, 0)].max(0.0).sqrt(),
        offset: c[1],
        offset_err: cov[(1, 1)].max(0.0).sqrt(),
        chi2,
    })
}

/// `c/3` in bits converted to the natural-log convention: `(c/3) / ln 2`.
pub fn c_tilde(c_over_3: f64) -> f64 {
    c_over_3 / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synthetic(p_c: f64, nu: f64, sizes: &[usize], ps: &[f64], noise: f64, seed: u64) -> ScalingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for &l in sizes {
            for &p in ps {
                let x = (p - p_c) * (l as f64).powf(1.0 / nu);
                let clean = 1.1 - 0.9 * (0.8 * x).tanh();
                let mean = if noise > 0.0 { clean + Normal::new(0.0, noise).unwrap().sample(&mut rng) } else { clean };
                pts.push(DataPoint { alpha: 4.0, scheme: Scheme::A, l, p, mean, stderr: noise.max(1e-12) });
            }
        }
        ScalingDataset::new(pts).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn collapse_recovers_synthetic_truth() {
        let ds = synthetic(0.25, 1.3, &[16, 32, 64, 128], &grid(0.2, 0.3, 11), 0.01, 1);
        let fit = collapse_fit(&ds, 16, 128).unwrap();
        assert!((fit.p_c - 0.25).abs() < 0.003, "{fit:?}");
        assert!((fit.nu - 1.3).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn collapse_objective_ignores_input_order() {
        let ds = synthetic(0.25, 1.3, &[16, 32, 64], &grid(0.2, 0.3, 7), 0.02, 2);
        let mut pts = ds.points().to_vec();
        pts.reverse();
        pts.swap(0, 5);
        let a = CollapseProblem::new(&ds).unwrap();
        // bypass the sorting constructor
        let b = CollapseProblem::new(&ScalingDataset { points: pts }).unwrap();
        let th = [0.26, 1.2f64.ln(), 0.1, -0.5, -3.0];
        assert!((a.nll(&th) - b.nll(&th)).abs() < 1e-9 * a.nll(&th).abs());
    }

    #[test]
    fn collapse_rejects_thin_data() {
        let ds = synthetic(0.25, 1.3, &[16, 32, 64], &grid(0.2, 0.3, 7), 0.02, 2);
        assert!(matches!(collapse_fit(&ds, 32, 64), Err(Error::InsufficientData(_))));
        let flat = ScalingDataset::new(
            ds.points().iter().map(|d| DataPoint { mean: 1.0, ..*d }).collect(),
        )
        .unwrap();
        assert!(matches!(collapse_fit(&flat, 16, 64), Err(Error::InsufficientData(_))));
        let thin = synthetic(0.25, 1.3, &[16, 32, 64], &grid(0.2, 0.3, 4), 0.02, 2);
        assert!(collapse_fit(&thin, 16, 64).is_err());
    }

    #[test]
    fn bootstrap_sigma_tracks_stderr() {
        let sizes = [16, 32, 64];
        let ps = grid(0.2, 0.3, 9);
        let clean = synthetic(0.25, 1.3, &sizes, &ps, 0.0, 0);
        let with = |s: f64| ScalingDataset::new(clean.points().iter().map(|d| DataPoint { stderr: s, ..*d }).collect()).unwrap();
        let tiny = bootstrap_collapse(&with(1e-7), 16, 64, 100, 5).unwrap();
        let small = bootstrap_collapse(&with(0.01), 16, 64, 100, 5).unwrap();
        let large = bootstrap_collapse(&with(0.02), 16, 64, 100, 5).unwrap();
        assert!(tiny.p_c_sd < 1e-4, "{tiny:?}");
        assert!(large.p_c_sd > small.p_c_sd && large.nu_sd > small.nu_sd);
        assert!(!small.flagged);
        assert!(bootstrap_collapse(&with(0.01), 16, 64, 50, 5).is_err());
    }

    #[test]
    fn bootstrap_coverage_near_one_sigma() {
        let trials = 60;
        let ps = grid(0.2, 0.3, 9);
        let hits = (0..trials)
            .filter(|&k| {
                let ds = synthetic(0.25, 1.3, &[16, 32, 64], &ps, 0.02, 100 + k);
                let b = bootstrap_collapse(&ds, 16, 64, 100, k).unwrap();
                (b.fit.p_c - 0.25).abs() <= b.p_c_sd
            })
            .count();
        let frac = hits as f64 / trials as f64;
        assert!((frac - 0.68).abs() <= 0.10, "coverage {frac}");
    }

    fn fit_at(l_min: usize, p_c: f64, nu: f64, err: Option<f64>) -> CollapseFit {
        CollapseFit {
            p_c,
            nu,
            sigma_f: 1.0,
            length: 1.0,
            noise: 0.0,
            log_likelihood: 0.0,
            l_min,
            l_max: 1024,
            converged: true,
            p_c_err: err,
            nu_err: err,
        }
    }

    #[test]
    fn extrapolation_in_inverse_lmin() {
        let consts: Vec<CollapseFit> = [8, 16, 32, 64, 128].iter().map(|&l| fit_at(l, 0.2, 1.25, Some(0.001))).collect();
        let e = lmin_extrapolate(&consts).unwrap();
        assert!((e.p_c - 0.2).abs() < 1e-12 && (e.nu - 1.25).abs() < 1e-12);
        let lin: Vec<CollapseFit> = [8, 16, 32, 64, 128].iter().map(|&l| fit_at(l, 0.25 + 0.3 / l as f64, 1.3 - 2.0 / l as f64, None)).collect();
        let e = lmin_extrapolate(&lin).unwrap();
        assert!((e.p_c - 0.25).abs() < 1e-10 && (e.nu - 1.3).abs() < 1e-10, "{e:?}");
        assert!(lmin_extrapolate(&lin[..3]).is_err());
    }

    fn lines(slope_small: f64, slope_large: f64) -> ScalingDataset {
        let mut pts = Vec::new();
        for p in grid(0.2, 0.4, 11) {
            pts.push(DataPoint { alpha: 2.0, scheme: Scheme::B, l: 32, p, mean: 1.1 + slope_small * (p - 0.3), stderr: 0.0 });
            pts.push(DataPoint { alpha: 2.0, scheme: Scheme::B, l: 64, p, mean: 1.1 + slope_large * (p - 0.3), stderr: 0.0 });
        }
        ScalingDataset::new(pts).unwrap()
    }

    #[test]
    fn crossing_of_exact_lines() {
        let c = find_crossing(&lines(-2.0, -5.0), 32, None, 0, 0).unwrap();
        assert!((c.p_cross - 0.3).abs() < 1e-6 && (c.i_cross - 1.1).abs() < 1e-6, "{c:?}");
        assert!(!c.ambiguous);
    }

    #[test]
    fn parallel_curves_do_not_cross() {
        let mut ds = lines(-2.0, -2.0).points().to_vec();
        ds.iter_mut().filter(|d| d.l == 64).for_each(|d| d.mean += 0.1);
        let ds = ScalingDataset::new(ds).unwrap();
        assert!(matches!(find_crossing(&ds, 32, None, 0, 0), Err(Error::NoCrossing(_))));
        assert!(matches!(find_crossing(&ds, 64, None, 0, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn crossing_bootstrap_scales_with_noise() {
        let mk = |s: f64| {
            let pts = lines(-2.0, -6.0).points().iter().map(|d| DataPoint { stderr: s, ..*d }).collect();
            ScalingDataset::new(pts).unwrap()
        };
        let a = find_crossing(&mk(0.005), 32, None, 200, 1).unwrap();
        let b = find_crossing(&mk(0.02), 32, None, 200, 1).unwrap();
        assert!(a.p_err.unwrap() > 0.0 && b.p_err.unwrap() > 2.0 * a.p_err.unwrap());
    }

    fn crossings(p_c: f64, nu: f64, w: f64, a1: f64, a2: f64) -> Vec<CrossingPoint> {
        [8usize, 16, 32, 64, 128, 256]
            .iter()
            .map(|&l| {
                let lf = l as f64;
                let p = p_c + a1 * lf.powf(-1.0 / nu - w) + a2 * lf.powf(-1.0 / nu - 2.0 * w);
                let i = 1.05 + 0.4 * lf.powf(-w) - 0.3 * lf.powf(-2.0 * w);
                CrossingPoint { l, p_cross: p, i_cross: i, p_err: Some(1e-5), i_err: Some(1e-4), ambiguous: false }
            })
            .collect()
    }

    #[test]
    fn omega_recovered_from_synthetic_crossings() {
        let pts = crossings(0.2, 1.25, 0.9, 0.5, -0.8);
        let fit = fit_crossing_p(&pts, 0.2, 1.25, CorrectionModel::Constrained).unwrap();
        assert!((fit.omega1 - 0.9).abs() < 0.1, "{fit:?}");
        assert!((fit.a1 - 0.5).abs() < 0.05 && (fit.a2 + 0.8).abs() < 0.1);
        assert!(fit_crossing_p(&pts[..3], 0.2, 1.25, CorrectionModel::Constrained).is_err());
    }

    #[test]
    fn nested_models_agree_without_second_term() {
        let pts = crossings(0.2, 1.25, 0.7, 0.5, 0.0);
        let two = fit_crossing_p(&pts, 0.2, 1.25, CorrectionModel::Constrained).unwrap();
        let one = fit_crossing_p(&pts, 0.2, 1.25, CorrectionModel::SingleTerm).unwrap();
        assert!((one.omega1 - 0.7).abs() < 1e-3 && one.a2 == 0.0);
        assert!((two.omega1 - 0.7).abs() < 0.05 && two.a2.abs() < 0.05, "{two:?}");
        let free = fit_crossing_p(&crossings(0.2, 1.25, 0.9, 0.5, -0.8), 0.2, 1.25, CorrectionModel::FreeOmega2).unwrap();
        assert!(free.omega2.unwrap() > free.omega1);
    }

    #[test]
    fn flat_landscape_is_flagged() {
        let pts: Vec<CrossingPoint> = crossings(0.2, 1.25, 0.9, 0.0, 0.0)
            .into_iter()
            .map(|c| CrossingPoint { p_err: Some(0.05), ..c })
            .collect();
        let fit = fit_crossing_p(&pts, 0.2, 1.25, CorrectionModel::Constrained).unwrap();
        assert!(fit.unidentifiable);
    }

    #[test]
    fn intercept_fit_recovers_c_over_3() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<CrossingPoint> = crossings(0.2, 1.25, 0.9, 0.5, -0.8)
            .into_iter()
            .map(|c| CrossingPoint { i_cross: c.i_cross + 1e-3 * (rng.random::<f64>() - 0.5), i_err: Some(1e-3), ..c })
            .collect();
        let fit = fit_crossing_i(&pts, 0.9, Scheme::A).unwrap();
        assert!((fit.c_over_3 - 1.05).abs() < 0.02, "{fit:?}");
        let g = geometric_factor(Scheme::B).unwrap();
        let scaled: Vec<CrossingPoint> = crossings(0.2, 1.25, 0.9, 0.5, -0.8)
            .into_iter()
            .map(|c| CrossingPoint { i_cross: g * c.i_cross, i_err: None, ..c })
            .collect();
        let fb = fit_crossing_i(&scaled, 0.9, Scheme::B).unwrap();
        assert!((fb.c_over_3 - 1.05).abs() < 1e-9 && (fb.b1 - 0.4).abs() < 1e-8);
        assert!(fit_crossing_i(&pts[..2], 0.9, Scheme::A).is_err());
    }

    #[test]
    fn chord_lengths() {
        assert!((chord_length(64, 32).unwrap() - 64.0 / PI).abs() < 1e-12);
        assert!((chord_length(16, 4).unwrap() - 3.6013).abs() < 1e-4);
        for s in 1..16 {
            assert!((chord_length(16, s).unwrap() - chord_length(16, 16 - s).unwrap()).abs() < 1e-12);
        }
        assert!(chord_length(16, 0).is_err() && chord_length(16, 16).is_err());
    }

    #[test]
    fn geometric_factors() {
        assert_eq!(geometric_factor(Scheme::A).unwrap(), 1.0);
        let expect = ((9.0 * PI / 16.0).sin().powi(2) / ((PI / 4.0).sin() * (PI / 8.0).sin())).log2();
        let b = geometric_factor(Scheme::B).unwrap();
        assert!((b - expect).abs() < 1e-12);
        assert!((b - 1.830).abs() < 1e-3);
    }

    #[test]
    fn entropy_log_fit() {
        let samples: Vec<(f64, f64, f64)> = [3.0f64, 7.5, 20.0, 81.0].iter().map(|&l| (l, 1.05 * l.log2() + 0.4, 0.01)).collect();
        let f = fit_entropy_log(&samples).unwrap();
        assert!((f.c_over_3 - 1.05).abs() < 1e-12 && (f.offset - 0.4).abs() < 1e-12);
        assert!(fit_entropy_log(&samples[..2]).is_err());
        let dup = vec![samples[0], samples[0], samples[1], samples[1]];
        assert!(matches!(fit_entropy_log(&dup), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn c_tilde_conversion() {
        assert_eq!(format!("{:.3}", c_tilde(1.053)), "1.519");
    }

    #[test]
    fn csv_round_trip() {
        let text = format!("{CSV_HEADER}\n4,0.2,16,a,1.2,0.01,10,100,3,32,7\n4,0.25,16,a,0.9,0.02,10,100,3,32,7\n");
        let ds = ScalingDataset::from_csv(&text).unwrap();
        assert_eq!(ds.points().len(), 2);
        assert_eq!(ds.groups(), vec![(4.0, Scheme::A)]);
        assert!(ScalingDataset::from_csv("").is_err());
        assert!(ScalingDataset::from_csv(CSV_HEADER).is_err());
        let dup = format!("{CSV_HEADER}\n4,0.2,16,a,1.2,0.01,10,100,3,32,7\n4,0.2,16,a,1.3,0.01,10,100,3,32,7\n");
        assert!(ScalingDataset::from_csv(&dup).is_err());
    }
}
