//! Sweep orchestration behind the `qcmi` binary: configuration files, the
//! resumable run manifest, and one function per subcommand.
//!
//! Configuration is line oriented, `key = value`, with `#` comments. List
//! values are comma separated; `start:stop:step` expands to an inclusive
//! grid.
//!
//! ```text
//! alpha = 4.0
//! p = 0.18:0.23:0.005
//! L = 16, 32, 64, 128
//! scheme = a, b
//! realizations = 1000
//! t_max = 4096
//! seed = 2024
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cliffords::CliffordGroup;
use crate::error::{Error, Result};
use crate::observables::{
    entropy_profile, format_sig9, pilot_delta_t, production_run, sample_count, t_min_for, AutocorrelationTime, Cell,
    EntropySample, Protocol, Scheme, SteadyStateEstimate, CSV_HEADER, PROFILE_CSV_HEADER,
};
use crate::scaling::{
    all_crossings, bootstrap_collapse, collapse_fit, collapsed_coordinates, fit_crossing_i, fit_crossing_p,
    fit_entropy_log, lmin_extrapolate, CollapseFit, CorrectionFit, CorrectionModel, CrossingPoint, EntropyFit,
    Extrapolation, InterceptFit, ScalingDataset,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const PROFILE_FILE: &str = "entropy_profile.csv";

/// Parsed `key = value` pairs; every key must be consumed.
#[derive(Debug, Default)]
struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1)))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<()> {
        if let Some((k, (n, _))) = self.entries.into_iter().next() {
            return Err(Error::Config(format!("line {n}: unknown key {k:?}")));
        }
        Ok(())
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|(n, v)| v.parse::<T>().map_err(|e| Error::Config(format!("line {n}: {key} = {v:?}: {e}"))))
            .transpose()
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((n, v)) = self.take(key) else { return Ok(None) };
        let bad = |e: String| Error::Config(format!("line {n}: {key} = {v:?}: {e}"));
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split(':').collect();
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            match parts.len() {
                1 => out.push(num(parts[0])?),
                3 => {
                    let (a, b, s) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
                    if !(s > 0.0) || b < a {
                        return Err(bad("range needs start <= stop and step > 0".into()));
                    }
                    let k = ((b - a) / s + 1e-9).floor() as usize;
                    out.extend((0..=k).map(|i| ((a + i as f64 * s) * 1e12).round() / 1e12));
                }
                _ => return Err(bad("expected a number or start:stop:step".into())),
            }
        }
        Ok(Some(out))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((n, v)) = self.take(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("line {n}: {key}: {s:?}: {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
}

/// A rectangular sweep over `(alpha, p, L, scheme)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub l: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub protocol: Protocol,
    pub seed: u64,
}

impl SweepConfig {
    /// Parses a sweep; `full_scale` raises the realization count to the
    /// full-scale value regardless of the file.
    pub fn parse(text: &str, full_scale: bool) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let alpha = require(kv.floats("alpha")?, "alpha")?;
        let p = require(kv.floats("p")?, "p")?;
        let l = require(kv.list::<usize>("L")?, "L")?;
        let schemes = kv.list::<Scheme>("scheme")?.unwrap_or_else(|| vec![Scheme::A]);
        let mut protocol = Protocol::default();
        if let Some(r) = kv.scalar("realizations")? {
            protocol.realizations = r;
        }
        if full_scale {
            protocol.realizations = Protocol::FULL_SCALE_REALIZATIONS;
        }
        if let Some(t) = kv.scalar("t_max")? {
            protocol.t_max = t;
        }
        if let Some(r) = kv.scalar("pilot_realizations")? {
            protocol.pilot_realizations = r;
        }
        let seed = kv.scalar("seed")?.unwrap_or(0);
        kv.finish()?;
        let cfg = Self { alpha, p, l, schemes, protocol, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, full_scale: bool) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, full_scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.p.is_empty() || self.l.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("alpha, p, L and scheme lists must be nonempty".into()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {a}")));
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("p must lie in [0, 1], got {p}")));
        }
        for &l in &self.l {
            for s in &self.schemes {
                crate::observables::Partition::new(l, *s)?;
            }
            if self.protocol.t_max < t_min_for(l) + 1 {
                return Err(Error::Config(format!("t_max = {} leaves no steady-state window at L = {l}", self.protocol.t_max)));
            }
        }
        if self.protocol.realizations == 0 || self.protocol.pilot_realizations == 0 {
            return Err(Error::Config("realization counts must be positive".into()));
        }
        Ok(())
    }

    /// Cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &scheme in &self.schemes {
                for &l in &self.l {
                    for &p in &self.p {
                        out.push(Cell { alpha, p, l, scheme });
                    }
                }
            }
        }
        out
    }
}

pub fn cell_key(c: &Cell) -> String {
    format!("alpha={}/scheme={}/L={}/p={}", format_sig9(c.alpha), c.scheme, c.l, format_sig9(c.p))
}

/// Completion records for a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub completed: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            completed: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Loads the manifest in `dir`, or starts a fresh one. A manifest left by
    /// a different command or configuration is an error.
    pub fn open(dir: &Path, command: &str, config: serde_json::Value, seed: u64) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(command, config, seed));
        }
        let m: Self = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if m.command != command || m.config != config || m.seed != seed {
            return Err(Error::Config(format!(
                "{} belongs to a different run; use a fresh output directory",
                path.display()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CellRecord {
    acf: AutocorrelationTime,
    estimate: SteadyStateEstimate,
}

pub fn results_csv(estimates: &[SteadyStateEstimate]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for e in estimates {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct SimulateSummary {
    pub estimates: Vec<SteadyStateEstimate>,
    pub computed: usize,
    pub reused: usize,
    pub csv_path: PathBuf,
}

/// Runs every cell of the sweep not yet recorded in `out_dir`'s manifest,
/// rewriting the manifest and the CSV after each cell. `on_cell` sees every
/// estimate as it completes (reused or fresh).
pub fn simulate(cfg: &SweepConfig, out_dir: &Path, mut on_cell: impl FnMut(&SteadyStateEstimate, bool)) -> Result<SimulateSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::open(out_dir, "simulate", serde_json::to_value(cfg)?, cfg.seed)?;
    manifest.outputs = vec![RESULTS_FILE.into()];
    let csv_path = out_dir.join(RESULTS_FILE);
    let (mut computed, mut reused) = (0, 0);
    let mut done: Vec<SteadyStateEstimate> = Vec::new();
    for cell in cfg.cells() {
        let key = cell_key(&cell);
        if let Some(v) = manifest.completed.get(&key) {
            let rec: CellRecord = serde_json::from_value(v.clone())?;
            on_cell(&rec.estimate, false);
            done.push(rec.estimate);
            reused += 1;
            continue;
        }
        let acf = pilot_delta_t(&cell, &cfg.protocol, cfg.seed)?;
        let acf = if cfg.protocol.t_max < t_min_for(cell.l) + acf.delta_t {
            // pilot interval longer than the window: sample once per step
            AutocorrelationTime { delta_t: 1, ..acf }
        } else {
            acf
        };
        let estimate = production_run(&cell, &cfg.protocol, cfg.seed, &acf)?;
        on_cell(&estimate, true);
        manifest.completed.insert(key, serde_json::to_value(CellRecord { acf, estimate: estimate.clone() })?);
        done.push(estimate);
        computed += 1;
        write_atomic(&csv_path, ordered_csv(cfg, &done).as_bytes())?;
        manifest.save(out_dir)?;
    }
    write_atomic(&csv_path, ordered_csv(cfg, &done).as_bytes())?;
    manifest.save(out_dir)?;
    Ok(SimulateSummary { estimates: done, computed, reused, csv_path })
}

fn ordered_csv(cfg: &SweepConfig, done: &[SteadyStateEstimate]) -> String {
    let keys: Vec<String> = cfg.cells().iter().map(cell_key).collect();
    let mut rows: Vec<&SteadyStateEstimate> = done.iter().collect();
    rows.sort_by_key(|e| {
        let k = cell_key(&Cell { alpha: e.alpha, p: e.p, l: e.l, scheme: e.scheme });
        keys.iter().position(|x| *x == k).unwrap_or(usize::MAX)
    });
    results_csv(&rows.into_iter().cloned().collect::<Vec<_>>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub collapse_resamples: usize,
    pub crossing_resamples: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { collapse_resamples: 200, crossing_resamples: 200, seed: 7 }
    }
}

impl AnalysisOptions {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut o = Self::default();
        if let Some(v) = kv.scalar("collapse_resamples")? {
            o.collapse_resamples = v;
        }
        if let Some(v) = kv.scalar("crossing_resamples")? {
            o.crossing_resamples = v;
        }
        if let Some(v) = kv.scalar("seed")? {
            o.seed = v;
        }
        kv.finish()?;
        Ok(o)
    }
}

/// Scaling analysis of one `(alpha, scheme)` group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupReport {
    pub alpha: f64,
    pub scheme: Scheme,
    pub sizes: Vec<usize>,
    /// Extrapolated when enough `L_min` values exist, otherwise the
    /// all-size collapse.
    pub p_c: Option<f64>,
    pub nu: Option<f64>,
    pub omega1: Option<f64>,
    pub c_over_3: Option<f64>,
    pub errors: BTreeMap<String, f64>,
    pub l_min_table: Vec<CollapseFit>,
    pub extrapolation: Option<Extrapolation>,
    pub crossing_table: Vec<CrossingPoint>,
    pub correction: Option<CorrectionFit>,
    pub intercept: Option<InterceptFit>,
    /// Steps that could not run, with the reason.
    pub gaps: Vec<String>,
}

pub fn analyze_group(ds: &ScalingDataset, alpha: f64, scheme: Scheme, opts: &AnalysisOptions) -> GroupReport {
    let ds = ds.select(alpha, scheme);
    let sizes = ds.sizes();
    let mut r = GroupReport {
        alpha,
        scheme,
        sizes: sizes.clone(),
        p_c: None,
        nu: None,
        omega1: None,
        c_over_3: None,
        errors: BTreeMap::new(),
        l_min_table: Vec::new(),
        extrapolation: None,
        crossing_table: Vec::new(),
        correction: None,
        intercept: None,
        gaps: Vec::new(),
    };
    let l_max = sizes.last().copied().unwrap_or(0);
    for (i, &l_min) in sizes.iter().enumerate() {
        if sizes.len() - i < 3 {
            break;
        }
        let fit = if opts.collapse_resamples >= 100 {
            bootstrap_collapse(&ds, l_min, l_max, opts.collapse_resamples, opts.seed).map(|b| b.fit)
        } else {
            collapse_fit(&ds, l_min, l_max)
        };
        match fit {
            Ok(f) => r.l_min_table.push(f),
            Err(e) => r.gaps.push(format!("collapse L_min={l_min}: {e}")),
        }
    }
    if let Some(first) = r.l_min_table.first() {
        r.p_c = Some(first.p_c);
        r.nu = Some(first.nu);
        if let (Some(a), Some(b)) = (first.p_c_err, first.nu_err) {
            r.errors.insert("p_c".into(), a);
            r.errors.insert("nu".into(), b);
        }
    }
    match lmin_extrapolate(&r.l_min_table) {
        Ok(e) => {
            r.p_c = Some(e.p_c);
            r.nu = Some(e.nu);
            r.errors.insert("p_c".into(), e.p_c_err);
            r.errors.insert("nu".into(), e.nu_err);
            r.extrapolation = Some(e);
        }
        Err(e) => r.gaps.push(format!("L_min extrapolation: {e}; reporting the collapse over all sizes")),
    }
    for (l, c) in all_crossings(&ds, r.p_c, opts.crossing_resamples, opts.seed) {
        match c {
            Ok(c) => r.crossing_table.push(c),
            Err(e) => r.gaps.push(format!("crossing ({l}, {}): {e}", 2 * l)),
        }
    }
    if let (Some(p_c), Some(nu)) = (r.p_c, r.nu) {
        match fit_crossing_p(&r.crossing_table, p_c, nu, CorrectionModel::Constrained) {
            Ok(f) => {
                r.omega1 = Some(f.omega1);
                r.errors.insert("omega1_low".into(), f.omega1_interval.0);
                r.errors.insert("omega1_high".into(), f.omega1_interval.1);
                match fit_crossing_i(&r.crossing_table, f.omega1, scheme) {
                    Ok(i) => {
                        r.c_over_3 = Some(i.c_over_3);
                        r.errors.insert("c_over_3".into(), i.c_over_3_err);
                        r.intercept = Some(i);
                    }
                    Err(e) => r.gaps.push(format!("intercept fit: {e}")),
                }
                r.correction = Some(f);
            }
            Err(e) => r.gaps.push(format!("correction fit: {e}")),
        }
    }
    r
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub source: String,
    pub options: AnalysisOptions,
    pub groups: Vec<GroupReport>,
}

/// Reads a results CSV, analyzes every group and writes `report.json` plus
/// one collapsed-coordinate CSV per group into `out_dir`.
pub fn analyze(results: &Path, out_dir: &Path, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let ds = ScalingDataset::from_csv(&fs::read_to_string(results)?)?;
    fs::create_dir_all(out_dir)?;
    let mut groups = Vec::new();
    for (alpha, scheme) in ds.groups() {
        let g = analyze_group(&ds, alpha, scheme, opts);
        if let Some(fit) = g.l_min_table.first() {
            let mut csv = String::from("x,y,L\n");
            for (x, y, l) in collapsed_coordinates(&ds.select(alpha, scheme), fit) {
                csv.push_str(&format!("{},{},{}\n", format_sig9(x), format_sig9(y), l));
            }
            write_atomic(&out_dir.join(format!("collapse_alpha{}_{}.csv", format_sig9(alpha), scheme)), csv.as_bytes())?;
        }
        groups.push(g);
    }
    let report = AnalysisReport { source: results.display().to_string(), options: *opts, groups };
    write_atomic(&out_dir.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}

/// Crossing table for every group of a results CSV.
pub fn crossings(results: &Path, resamples: usize, seed: u64) -> Result<String> {
    let ds = ScalingDataset::from_csv(&fs::read_to_string(results)?)?;
    let mut out = String::from("alpha,scheme,L,2L,p_cross,p_err,I_cross,I_err,ambiguous\n");
    for (alpha, scheme) in ds.groups() {
        let g = ds.select(alpha, scheme);
        for (l, c) in all_crossings(&g, None, resamples, seed) {
            match c {
                Ok(c) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    format_sig9(alpha),
                    scheme,
                    l,
                    2 * l,
                    format_sig9(c.p_cross),
                    format_sig9(c.p_err.unwrap_or(f64::NAN)),
                    format_sig9(c.i_cross),
                    format_sig9(c.i_err.unwrap_or(f64::NAN)),
                    c.ambiguous
                )),
                Err(e) => log::warn!("alpha={alpha} scheme={scheme} ({l}, {}): {e}", 2 * l),
            }
        }
    }
    Ok(out)
}

/// Size of the enumerated two-qubit Clifford group and how many elements
/// pass the symplectic check.
pub fn census() -> Result<(usize, usize)> {
    Ok(CliffordGroup::enumerate()?.census())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub alpha: f64,
    pub p: f64,
    pub l: Vec<usize>,
    pub protocol: Protocol,
    pub seed: u64,
    /// Fixed sampling interval; estimated from a scheme-a QCMI pilot when absent.
    pub delta_t: Option<usize>,
}

impl ProfileConfig {
    pub fn parse(text: &str, full_scale: bool) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let alpha = require(kv.scalar("alpha")?, "alpha")?;
        let p = require(kv.scalar("p")?, "p")?;
        let l = require(kv.list::<usize>("L")?, "L")?;
        let mut protocol = Protocol::default();
        if let Some(r) = kv.scalar("realizations")? {
            protocol.realizations = r;
        }
        if full_scale {
            protocol.realizations = Protocol::FULL_SCALE_REALIZATIONS;
        }
        if let Some(t) = kv.scalar("t_max")? {
            protocol.t_max = t;
        }
        if let Some(r) = kv.scalar("pilot_realizations")? {
            protocol.pilot_realizations = r;
        }
        let seed = kv.scalar("seed")?.unwrap_or(0);
        let delta_t = kv.scalar("delta_t")?;
        kv.finish()?;
        let cfg = Self { alpha, p, l, protocol, seed, delta_t };
        SweepConfig { alpha: vec![alpha], p: vec![p], l: cfg.l.clone(), schemes: vec![Scheme::A, Scheme::B], protocol, seed }
            .validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, full_scale: bool) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, full_scale)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileRow {
    pub l: usize,
    pub delta_t: usize,
    pub n_t: usize,
    pub sample: EntropySample,
}

#[derive(Clone, Debug)]
pub struct ProfileSummary {
    pub rows: Vec<ProfileRow>,
    pub fit: Option<EntropyFit>,
    pub csv_path: PathBuf,
}

/// Steady-state entropies of `AB`, `BC` and `D` in both schemes for every
/// `L`, with a log-fit against chord length over all rows.
pub fn run_entropy_profile(cfg: &ProfileConfig, out_dir: &Path) -> Result<ProfileSummary> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::open(out_dir, "entropy-profile", serde_json::to_value(cfg)?, cfg.seed)?;
    manifest.outputs = vec![PROFILE_FILE.into()];
    let mut rows: Vec<ProfileRow> = Vec::new();
    for &l in &cfg.l {
        let key = format!("L={l}");
        if let Some(v) = manifest.completed.get(&key) {
            rows.extend(serde_json::from_value::<Vec<ProfileRow>>(v.clone())?);
            continue;
        }
        let t_min = t_min_for(l);
        let delta_t = match cfg.delta_t {
            Some(d) => d,
            None => pilot_delta_t(&Cell { alpha: cfg.alpha, p: cfg.p, l, scheme: Scheme::A }, &cfg.protocol, cfg.seed)?.delta_t,
        }
        .min(cfg.protocol.t_max - t_min)
        .max(1);
        let n_t = sample_count(t_min, delta_t, cfg.protocol.t_max);
        let new: Vec<ProfileRow> = entropy_profile(cfg.alpha, cfg.p, l, &cfg.protocol, cfg.seed, delta_t)?
            .into_iter()
            .map(|sample| ProfileRow { l, delta_t, n_t, sample })
            .collect();
        manifest.completed.insert(key, serde_json::to_value(&new)?);
        rows.extend(new);
        manifest.save(out_dir)?;
    }
    let mut csv = String::from(PROFILE_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        let s = &r.sample;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            format_sig9(cfg.alpha),
            format_sig9(cfg.p),
            r.l,
            s.scheme,
            s.region.label(),
            s.size,
            format_sig9(s.chord),
            format_sig9(s.mean),
            format_sig9(s.stderr.unwrap_or(f64::NAN)),
            cfg.protocol.realizations,
            r.n_t,
            r.delta_t,
            t_min_for(r.l),
            cfg.seed
        ));
    }
    let csv_path = out_dir.join(PROFILE_FILE);
    write_atomic(&csv_path, csv.as_bytes())?;
    manifest.save(out_dir)?;
    let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.sample.chord, r.sample.mean, r.sample.stderr.unwrap_or(0.0))).collect();
    let fit = fit_entropy_log(&pts).ok();
    Ok(ProfileSummary { rows, fit, csv_path })
}
