//! Scenario files, the stats → PDT → tracking → key-rate pipeline, and its
//! tabular outputs.

pub mod cache;
pub mod config;

pub use cache::{cache_key, default_cache_dir, Lookup, StatsCache, StatsCacheEntry, CACHE_DIR_ENV};
pub use config::{parse_quantity, ConfigError, Dim, RawConfig};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::pdt::{composite_pdt_build, BuildOptions, CompositePdt, PdtError, DEFAULT_SAMPLES};
use crate::qkd::{self, DecoyParams, QkdError, RateOptions};
use crate::qmc::Budget;
use crate::tracking::{postselect, tracked_pdt, TrackingConfig, TrackingError};
use crate::turbulence::{channel_stats, rytov_parameter, ChannelParams, ChannelStats, KernelError, KERNEL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Stats,
    Pdt,
    Exceedance,
    Squeezing,
    Qkd,
}

impl Table {
    pub const ALL: [Table; 5] = [Table::Stats, Table::Pdt, Table::Exceedance, Table::Squeezing, Table::Qkd];

    pub fn name(self) -> &'static str {
        match self {
            Table::Stats => "stats",
            Table::Pdt => "pdt",
            Table::Exceedance => "exceedance",
            Table::Squeezing => "squeezing",
            Table::Qkd => "qkd",
        }
    }

    pub fn from_name(s: &str) -> Option<Table> {
        Table::ALL.into_iter().find(|t| t.name() == s)
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            Table::Stats => &[
                "scenario_id", "seed", "length_m", "cn2", "rytov", "fresnel", "mean_eta", "mean_eta_se", "mean_eta2",
                "mean_eta2_se", "sigma_bw2", "sigma_bw2_se", "wst2", "wst2_se", "warnings",
            ],
            Table::Pdt => &["scenario_id", "seed", "length_m", "tracking_fraction", "eta", "density"],
            Table::Exceedance => &["scenario_id", "seed", "length_m", "tracking_fraction", "eta", "exceedance"],
            Table::Squeezing => &[
                "scenario_id", "seed", "length_m", "tracking_fraction", "eta_min", "acceptance", "mean_eta_ps",
                "squeezing_db",
            ],
            Table::Qkd => &[
                "scenario_id", "seed", "length_m", "mean_loss_db", "rate", "rate_se", "rate_tracked",
                "rate_tracked_se", "improvement",
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub budget: Budget,
    pub channel: ChannelParams,
    /// Link lengths to sweep; empty runs the channel as given.
    pub lengths: Vec<f64>,
    pub outputs: Vec<Table>,
    pub pdt_samples: usize,
    pub grid_step: f64,
    /// `σ_tr / σ_bw` values.
    pub tracking_fractions: Vec<f64>,
    /// Variance of extra pointing jitter, m².
    pub jitter2: f64,
    pub thresholds: Vec<f64>,
    pub squeezing_input_db: Option<f64>,
    /// Decoy settings; `eta_d` holds the detector-side transmittance only.
    pub decoy: DecoyParams,
    pub rate_draws: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.id",
    "scenario.seed",
    "scenario.outputs",
    "budget.points",
    "budget.replicates",
    "channel.cn2",
    "channel.wavelength",
    "channel.length",
    "channel.w0",
    "channel.aperture",
    "channel.extinction",
    "sweep.lengths",
    "pdt.samples",
    "pdt.grid_step",
    "tracking.fractions",
    "tracking.jitter",
    "postselection.thresholds",
    "squeezing.input",
    "qkd.mu_s",
    "qkd.mu_d",
    "qkd.y0",
    "qkd.e_det",
    "qkd.f",
    "qkd.detector_loss",
    "qkd.draws",
];

fn ascending(c: &RawConfig, key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::new(c.line(key), key, "values must be strictly ascending"));
    }
    Ok(())
}

fn channel_key(field: &str) -> &'static str {
    match field {
        "cn2" => "channel.cn2",
        "wavelength" => "channel.wavelength",
        "length" => "channel.length",
        "w0" => "channel.w0",
        "aperture_radius" => "channel.aperture",
        _ => "channel.extinction",
    }
}

impl Scenario {
    pub fn parse(text: &str, default_id: &str) -> Result<Scenario, ConfigError> {
        let c = RawConfig::parse(text)?;
        for (k, line) in c.keys() {
            if !KNOWN_KEYS.contains(&k) {
                return Err(ConfigError::new(line, k, "unknown key"));
            }
        }
        let id = c.text("scenario.id").unwrap_or(default_id).to_string();
        if id.is_empty() || !id.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) {
            return Err(ConfigError::new(
                c.line("scenario.id"),
                "scenario.id",
                "use letters, digits, `-`, `_` or `.`",
            ));
        }
        let outputs_text = c
            .text("scenario.outputs")
            .ok_or_else(|| ConfigError::new(0, "scenario.outputs", "missing required key"))?;
        let mut outputs = Vec::new();
        for name in outputs_text.split(',').map(str::trim) {
            let t = Table::from_name(name).ok_or_else(|| {
                ConfigError::new(c.line("scenario.outputs"), "scenario.outputs", format!("unknown output `{name}`"))
            })?;
            if !outputs.contains(&t) {
                outputs.push(t);
            }
        }
        outputs.sort();

        let budget = Budget::new(
            c.integer("budget.points")?.unwrap_or(Budget::DEFAULT.points),
            c.integer("budget.replicates")?.map_or(Budget::DEFAULT.replicates, |r| r.min(u32::MAX as u64) as u32),
        );
        if !budget.is_valid() {
            return Err(ConfigError::new(
                c.line("budget.points"),
                "budget.points",
                "need at least two replicates and two points per replicate",
            ));
        }

        let channel = ChannelParams {
            cn2: c.required("channel.cn2", Dim::None)?,
            wavelength: c.required("channel.wavelength", Dim::Length)?,
            length: c.required("channel.length", Dim::Length)?,
            w0: c.required("channel.w0", Dim::Length)?,
            aperture_radius: c.required("channel.aperture", Dim::Length)?,
            extinction_db_per_km: c.quantity("channel.extinction", Dim::DecibelPerKm)?.unwrap_or(0.0),
        };
        if let Err(KernelError::InvalidParams { field, value }) = channel.validate() {
            let key = channel_key(field);
            return Err(ConfigError::new(c.line(key), key, format!("invalid value {value}")));
        }

        let lengths = c.list("sweep.lengths", Dim::Length)?.unwrap_or_default();
        ascending(&c, "sweep.lengths", &lengths)?;
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(ConfigError::new(c.line("sweep.lengths"), "sweep.lengths", "lengths must be positive"));
        }

        let pdt_samples = c.integer("pdt.samples")?.unwrap_or(DEFAULT_SAMPLES as u64) as usize;
        if pdt_samples < 1000 {
            return Err(ConfigError::new(c.line("pdt.samples"), "pdt.samples", "need at least 1000 radii"));
        }
        let grid_step = c.quantity("pdt.grid_step", Dim::None)?.unwrap_or(0.002);
        if !(grid_step > 0.0 && grid_step <= 0.5) {
            return Err(ConfigError::new(c.line("pdt.grid_step"), "pdt.grid_step", "step must lie in (0, 0.5]"));
        }

        let tracking_fractions = c.list("tracking.fractions", Dim::None)?.unwrap_or_else(|| vec![0.0]);
        ascending(&c, "tracking.fractions", &tracking_fractions)?;
        if tracking_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(ConfigError::new(
                c.line("tracking.fractions"),
                "tracking.fractions",
                "fractions of the wandering width must lie in [0, 1]",
            ));
        }
        let jitter = c.quantity("tracking.jitter", Dim::Length)?.unwrap_or(0.0);
        if jitter < 0.0 {
            return Err(ConfigError::new(c.line("tracking.jitter"), "tracking.jitter", "must be non-negative"));
        }

        let thresholds = c.list("postselection.thresholds", Dim::None)?.unwrap_or_else(|| vec![0.0]);
        ascending(&c, "postselection.thresholds", &thresholds)?;
        if thresholds.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(ConfigError::new(
                c.line("postselection.thresholds"),
                "postselection.thresholds",
                "thresholds must lie in [0, 1)",
            ));
        }
        let squeezing_input_db = c.quantity("squeezing.input", Dim::Decibel)?;
        if outputs.contains(&Table::Squeezing) {
            match squeezing_input_db {
                None => return Err(ConfigError::new(0, "squeezing.input", "required by the squeezing output")),
                Some(v) if v >= 0.0 => {
                    return Err(ConfigError::new(c.line("squeezing.input"), "squeezing.input", "input must be squeezed (< 0 dB)"))
                }
                _ => {}
            }
        }

        let d = DecoyParams::default();
        let detector_loss = c.quantity("qkd.detector_loss", Dim::Decibel)?.unwrap_or(0.0);
        let decoy = DecoyParams {
            mu_s: c.quantity("qkd.mu_s", Dim::None)?.unwrap_or(d.mu_s),
            mu_d: c.quantity("qkd.mu_d", Dim::None)?.unwrap_or(d.mu_d),
            y0: c.quantity("qkd.y0", Dim::None)?.unwrap_or(d.y0),
            e_det: c.quantity("qkd.e_det", Dim::None)?.unwrap_or(d.e_det),
            f: c.quantity("qkd.f", Dim::None)?.unwrap_or(d.f),
            eta_d: 10f64.powf(-detector_loss / 10.0),
        };
        match decoy.validate() {
            Ok(()) => {}
            Err(QkdError::DecoyOrderingViolation { .. }) => {
                return Err(ConfigError::new(c.line("qkd.mu_d"), "qkd.mu_d", "need 0 < mu_s < mu_d < 1"))
            }
            Err(QkdError::InvalidParams { field, value }) => {
                let key = if field == "eta_d" { "qkd.detector_loss".to_string() } else { format!("qkd.{field}") };
                return Err(ConfigError::new(c.line(&key), &key, format!("invalid value {value}")));
            }
            Err(e) => return Err(ConfigError::new(0, "qkd", e.to_string())),
        }
        let rate_draws = c.integer("qkd.draws")?.unwrap_or(10_000) as usize;
        if rate_draws == 0 {
            return Err(ConfigError::new(c.line("qkd.draws"), "qkd.draws", "need at least one draw"));
        }

        Ok(Scenario {
            id,
            seed: c.integer("scenario.seed")?.unwrap_or(0),
            budget,
            channel,
            lengths,
            outputs,
            pdt_samples,
            grid_step,
            tracking_fractions,
            jitter2: jitter * jitter,
            thresholds,
            squeezing_input_db,
            decoy,
            rate_draws,
        })
    }

    pub fn from_file(path: &Path) -> Result<(Scenario, String), RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Ok((Scenario::parse(&text, stem)?, text))
    }

    /// Channel of every sweep point, in sweep order.
    pub fn points(&self) -> Vec<ChannelParams> {
        if self.lengths.is_empty() {
            vec![self.channel]
        } else {
            self.lengths.iter().map(|&length| ChannelParams { length, ..self.channel }).collect()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Pdt(#[from] PdtError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Qkd(#[from] QkdError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 convergence, 4 model breakdown, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        fn pdt(e: &PdtError) -> i32 {
            match e {
                PdtError::Quadrature(_) => 3,
                PdtError::InvalidInput(_) => 2,
                PdtError::Format(_) => 5,
                _ => 4,
            }
        }
        match self {
            RunError::Config(_) => 2,
            RunError::Kernel(KernelError::InvalidParams { .. }) => 2,
            RunError::Kernel(_) => 3,
            RunError::Pdt(e) => pdt(e),
            RunError::Tracking(TrackingError::Pdt(e)) => pdt(e),
            RunError::Tracking(TrackingError::EmptyPostselection { .. }) => 4,
            RunError::Tracking(_) => 2,
            RunError::Qkd(QkdError::Pdt(e)) => pdt(e),
            RunError::Qkd(QkdError::DivisionByZeroRate { .. }) => 4,
            RunError::Qkd(_) => 2,
            RunError::Io { .. } => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// `None` disables caching.
    pub cache: Option<StatsCache>,
    pub seed: Option<u64>,
    pub budget_points: Option<u64>,
    /// Overrides the tables listed in the scenario.
    pub tables: Option<Vec<Table>>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub tables: BTreeMap<Table, PathBuf>,
    pub pdt_files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub warnings: Vec<String>,
}

/// Nine significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

struct PointOutput {
    params: ChannelParams,
    stats: ChannelStats,
    cache: &'static str,
    pdt: Option<CompositePdt>,
    rows: BTreeMap<Table, Vec<Vec<String>>>,
    warnings: Vec<String>,
}

fn point_stats(
    params: &ChannelParams,
    budget: Budget,
    seed: u64,
    cache: Option<&StatsCache>,
    warnings: &mut Vec<String>,
) -> Result<(ChannelStats, &'static str), RunError> {
    let Some(cache) = cache else {
        return Ok((channel_stats(params, budget, seed)?, "disabled"));
    };
    let mut state = "miss";
    match cache.get(params, budget, seed) {
        Lookup::Hit(e) => return Ok((e.stats, "hit")),
        Lookup::Miss => {}
        Lookup::Corrupt(why) => {
            log::warn!("stats cache entry for L = {} m ignored: {why}", params.length);
            warnings.push(format!("cache entry for length {} m was corrupt ({why}); recomputed", params.length));
            state = "corrupt";
        }
    }
    let stats = channel_stats(params, budget, seed)?;
    if let Err(e) = cache.put(params, budget, seed, &stats) {
        log::warn!("could not write stats cache: {e}");
        warnings.push(format!("cache write failed: {e}"));
    }
    Ok((stats, state))
}

fn run_point(s: &Scenario, params: ChannelParams, tables: &[Table], seed: u64, budget: Budget, cache: Option<&StatsCache>) -> Result<PointOutput, RunError> {
    let mut warnings = Vec::new();
    let (stats, cache_state) = point_stats(&params, budget, seed, cache, &mut warnings)?;
    warnings.extend(stats.diagnostics.warnings.iter().cloned());
    let id = s.id.clone();
    let lead = |extra: Vec<String>| -> Vec<String> {
        let mut r = vec![id.clone(), seed.to_string(), fmt_num(params.length)];
        r.extend(extra);
        r
    };
    let mut rows: BTreeMap<Table, Vec<Vec<String>>> = BTreeMap::new();
    if tables.contains(&Table::Stats) {
        let (b, e) = (stats.stats, stats.errors);
        rows.insert(
            Table::Stats,
            vec![lead(vec![
                fmt_num(params.cn2),
                fmt_num(rytov_parameter(&params)),
                fmt_num(params.fresnel()),
                fmt_num(b.mean_eta),
                fmt_num(e.mean_eta),
                fmt_num(b.mean_eta2),
                fmt_num(e.mean_eta2),
                fmt_num(b.sigma_bw2),
                fmt_num(e.sigma_bw2),
                fmt_num(b.wst2),
                fmt_num(e.wst2),
                stats.diagnostics.warnings.len().to_string(),
            ])],
        );
    }
    let needs_pdt = tables.iter().any(|t| *t != Table::Stats);
    if !needs_pdt {
        return Ok(PointOutput {
            params,
            stats,
            cache: cache_state,
            pdt: None,
            rows,
            warnings,
        });
    }
    let c = composite_pdt_build(
        &stats.stats,
        params.aperture_radius,
        BuildOptions {
            samples: s.pdt_samples,
            seed,
        },
    )?;
    let tracked: Vec<(f64, CompositePdt)> = s
        .tracking_fractions
        .iter()
        .map(|&f| {
            let t = if f == 1.0 {
                TrackingConfig::with_jitter(c.sigma_bw2, c.sigma_bw2 + s.jitter2, s.jitter2)
            } else {
                TrackingConfig::with_jitter(c.sigma_bw2, f * f * (c.sigma_bw2 + s.jitter2), s.jitter2)
            }?;
            Ok((f, tracked_pdt(&c, &t)?))
        })
        .collect::<Result<_, TrackingError>>()?;
    let steps = (1.0 / s.grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * s.grid_step).min(1.0)).collect();
    if tables.contains(&Table::Pdt) {
        let mut r = Vec::new();
        for (f, p) in &tracked {
            for (eta, d) in grid.iter().zip(p.density_grid(&grid)) {
                r.push(lead(vec![fmt_num(*f), fmt_num(*eta), fmt_num(d)]));
            }
        }
        rows.insert(Table::Pdt, r);
    }
    if tables.contains(&Table::Exceedance) {
        let mut r = Vec::new();
        for (f, p) in &tracked {
            for &eta in &grid {
                r.push(lead(vec![fmt_num(*f), fmt_num(eta), fmt_num(p.exceedance(eta))]));
            }
        }
        rows.insert(Table::Exceedance, r);
    }
    if tables.contains(&Table::Squeezing) {
        let v_in = s.squeezing_input_db.expect("validated at parse time");
        let mut r = Vec::new();
        for (f, p) in &tracked {
            for &t in &s.thresholds {
                let ps = postselect(p, t)?;
                r.push(lead(vec![
                    fmt_num(*f),
                    fmt_num(t),
                    fmt_num(ps.acceptance),
                    fmt_num(ps.mean_eta),
                    fmt_num(crate::tracking::squeezing_after_loss_db(v_in, ps.mean_eta)),
                ]));
            }
        }
        rows.insert(Table::Squeezing, r);
    }
    if tables.contains(&Table::Qkd) {
        let r = qkd_fields(s, &params, &c, stats.stats.mean_eta, seed)?;
        rows.insert(Table::Qkd, vec![lead(r)]);
    }
    Ok(PointOutput {
        params,
        stats,
        cache: cache_state,
        pdt: Some(c),
        rows,
        warnings,
    })
}

/// `mean_loss_db, rate, rate_se, rate_tracked, rate_tracked_se, improvement`;
/// improvement is left blank when the tracked rate vanishes.
fn qkd_fields(s: &Scenario, params: &ChannelParams, c: &CompositePdt, mean_eta: f64, seed: u64) -> Result<Vec<String>, RunError> {
    let decoy = DecoyParams {
        eta_d: s.decoy.eta_d * params.extinction_transmittance(),
        ..s.decoy
    };
    let o = RateOptions::default();
    let plain = qkd::averaged_key_rate_pdt(c, &decoy, s.rate_draws, seed, o)?;
    let best = qkd::averaged_key_rate_pdt(&c.with_radius_variance(0.0), &decoy, s.rate_draws, seed, o)?;
    let improvement = match qkd::relative_improvement(best.rate, plain.rate) {
        Ok(i) => fmt_num(i),
        Err(_) => String::new(),
    };
    Ok(vec![
        fmt_num(qkd::mean_loss_db(decoy.eta_d, mean_eta)),
        fmt_num(plain.rate),
        fmt_num(plain.std_error),
        fmt_num(best.rate),
        fmt_num(best.std_error),
        improvement,
    ])
}

/// Key rates from PDT files written by an earlier run. Extinction comes from
/// the scenario channel; the mean loss uses the PDT's own first moment.
pub fn qkd_from_pdt_files(s: &Scenario, files: &[PathBuf], seed: u64, out: &Path) -> Result<(), RunError> {
    let mut rows = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| RunError::io(f, e))?;
        let c = CompositePdt::from_json(&text)?;
        let mean_eta = c.untruncated_moment(1.0).mean;
        let mut r = vec![s.id.clone(), seed.to_string(), fmt_num(s.channel.length)];
        r.extend(qkd_fields(s, &s.channel, &c, mean_eta, seed)?);
        rows.push(r);
    }
    write_csv(out, Table::Qkd.header(), &rows)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| RunError::io(path, e.into()))?;
    w.write_record(header).map_err(|e| RunError::io(path, e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| RunError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// Runs every sweep point (concurrently), then writes one CSV per table in
/// sweep order, the untracked PDT of each point, and a JSON manifest.
pub fn run(s: &Scenario, config_text: &str, opts: &RunOptions) -> Result<RunReport, RunError> {
    let seed = opts.seed.unwrap_or(s.seed);
    let budget = match opts.budget_points {
        Some(points) => Budget::new(points, s.budget.replicates),
        None => s.budget,
    };
    if !budget.is_valid() {
        return Err(ConfigError::new(0, "--budget", format!("budget of {} points is too small", budget.points)).into());
    }
    let tables = opts.tables.clone().unwrap_or_else(|| s.outputs.clone());
    if tables.is_empty() {
        return Err(ConfigError::new(0, "scenario.outputs", "no output requested").into());
    }
    if tables.contains(&Table::Squeezing) && s.squeezing_input_db.is_none() {
        return Err(ConfigError::new(0, "squeezing.input", "required by the squeezing output").into());
    }
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::io(&opts.out_dir, e))?;

    let points = s.points();
    let outputs: Vec<PointOutput> = points
        .par_iter()
        .map(|p| run_point(s, *p, &tables, seed, budget, opts.cache.as_ref()))
        .collect::<Result<_, _>>()?;

    let mut report = RunReport {
        tables: BTreeMap::new(),
        pdt_files: Vec::new(),
        manifest: opts.out_dir.join(format!("{}_manifest.json", s.id)),
        warnings: Vec::new(),
    };
    for &t in &tables {
        let rows: Vec<Vec<String>> = outputs
            .iter()
            .flat_map(|o| o.rows.get(&t).cloned().unwrap_or_default())
            .collect();
        let path = opts.out_dir.join(format!("{}_{}.csv", s.id, t.name()));
        write_csv(&path, t.header(), &rows)?;
        report.tables.insert(t, path);
    }
    let mut point_meta = Vec::new();
    for (i, o) in outputs.iter().enumerate() {
        let pdt_meta = match &o.pdt {
            Some(c) => {
                let path = if points.len() == 1 {
                    opts.out_dir.join(format!("{}_pdt.json", s.id))
                } else {
                    opts.out_dir.join(format!("{}_pdt_{i:03}.json", s.id))
                };
                std::fs::write(&path, c.to_json()).map_err(|e| RunError::io(&path, e))?;
                report.pdt_files.push(path.clone());
                serde_json::json!({
                    "file": path.file_name().and_then(|n| n.to_str()),
                    "eta0_norm": c.eta0_norm,
                    "zeta0_sq": c.zeta0_sq,
                    "sigma_r0": c.sigma_r0,
                    "weibull": c.weibull,
                    "samples": c.sample_count,
                })
            }
            None => serde_json::Value::Null,
        };
        report.warnings.extend(o.warnings.iter().cloned());
        point_meta.push(serde_json::json!({
            "length_m": o.params.length,
            "channel": o.params,
            "cache": o.cache,
            "stats": o.stats,
            "pdt": pdt_meta,
            "warnings": o.warnings,
        }));
    }
    let manifest = serde_json::json!({
        "scenario": s,
        "config_sha256": hex::encode(Sha256::digest(config_text.as_bytes())),
        "seed": seed,
        "budget": budget,
        "kernel_version": KERNEL_VERSION,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "created_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        "tables": report.tables.iter().map(|(t, p)| (t.name(), p.file_name().and_then(|n| n.to_str()))).collect::<BTreeMap<_, _>>(),
        "points": point_meta,
    });
    std::fs::write(&report.manifest, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
        .map_err(|e| RunError::io(&report.manifest, e))?;
    Ok(report)
}
