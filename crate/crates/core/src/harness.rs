//! Seeded Monte-Carlo trials and parameter sweeps.
//!
//! A trial is a pure function of its [`SystemConfig`] and a 64-bit trial
//! seed: pilots, users and noise each draw from their own ChaCha stream
//! keyed by the seed and a purpose tag. Sweeps derive the trial seed from
//! the root seed, the point index and the trial index, so adding points or
//! trials leaves every existing trial unchanged.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airlink::{
    assemble_ground_truth, complexify, dft_transform_matrix, realify, synthesize_received,
    GroundTruth, Measurement, RealSystem,
};
use crate::channel::{sample_actives, ChannelParams, UserRealization};
use crate::detect::{detect_rows, detect_users, match_and_score, DetectedUser, DetectorConfig, ScoreReport};
use crate::pilot::{build_extended_matrix, generate_pilot_pool, ExtendedPilotMatrix, PilotPool};
use crate::sbl::{solve, IterationRecord, SolverConfig, SolverKind};
use crate::{CMat, Error, Result};

/// Scenario parameters of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Pilot length `L`.
    pub pilot_len: usize,
    /// Pilot pool size `N_p`.
    pub pilots: usize,
    /// Active users `K`.
    pub active: usize,
    /// Maximum frame delay `t_m` in symbols.
    pub max_delay: usize,
    /// `inf` for a noiseless link.
    pub snr_db: f64,
    /// Solver noise variance per real entry used when the link is noiseless.
    #[serde(default = "default_noiseless_sigma2")]
    pub noiseless_sigma2: f64,
    /// Guard interval in symbols; only checked against `max_delay`.
    #[serde(default)]
    pub guard: Option<usize>,
    pub channel: ChannelParams,
    /// `sigma2` is overwritten from the SNR in every trial.
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
}

fn default_noiseless_sigma2() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Fast,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

impl SystemConfig {
    /// `fast`: M=32, N_p=32, L=32, t_m=4, K=12. `paper`: M=64, N_p=64, L=64,
    /// t_m=4, K=30 (slow). Both at 15 dB with a 15 degree spread.
    pub fn profile(profile: Profile) -> Self {
        let (m, n_p, l, k) = match profile {
            Profile::Fast => (32, 32, 32, 12),
            Profile::Paper => (64, 64, 64, 30),
        };
        Self {
            pilot_len: l,
            pilots: n_p,
            active: k,
            max_delay: 4,
            snr_db: 15.0,
            noiseless_sigma2: default_noiseless_sigma2(),
            guard: None,
            channel: ChannelParams::with_antennas(m),
            solver: SolverConfig::default(),
            detector: DetectorConfig::default(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.channel.antennas
    }

    /// Number of extended rows `N_p (t_m + 1)`.
    pub fn extended_rows(&self) -> usize {
        self.pilots * (self.max_delay + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pilot_len == 0 || self.pilots == 0 {
            return Err(Error::Config("pilot length and pool size must be >= 1".into()));
        }
        if self.active == 0 {
            return Err(Error::Config("number of active users must be >= 1".into()));
        }
        if self.active > self.extended_rows() {
            return Err(Error::Config(format!(
                "K={} exceeds N_p (t_m + 1) = {}",
                self.active,
                self.extended_rows()
            )));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("invalid snr_db {}", self.snr_db)));
        }
        if !(self.noiseless_sigma2 > 0.0) {
            return Err(Error::Config("noiseless_sigma2 must be > 0".into()));
        }
        self.channel.validate()?;
        self.solver.validate()?;
        self.detector.validate()?;
        Ok(())
    }

    /// Non-fatal configuration remarks.
    pub fn warnings(&self) -> Vec<String> {
        match self.guard {
            Some(g) if self.max_delay >= g => vec![format!(
                "max_delay {} is not below the guard interval {g}",
                self.max_delay
            )],
            _ => Vec::new(),
        }
    }
}

const TAG_PILOTS: u64 = 1;
const TAG_USERS: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_TRIAL: u64 = 4;

/// Independent generator for `(seed, tag, a, b)`.
pub fn child_rng(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, tag, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(root: u64, point: usize, trial: usize) -> u64 {
    use rand::RngCore;
    child_rng(root, TAG_TRIAL, point as u64, trial as u64).next_u64()
}

/// Everything the solvers see for one trial, plus the truth to score against.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ext: ExtendedPilotMatrix,
    pub psi: CMat,
    pub truth: GroundTruth,
    pub measurement: Measurement,
    pub system: RealSystem,
}

/// Pilot pool of an experiment, drawn from the root seed's pilot stream.
pub fn experiment_pool(cfg: &SystemConfig, root_seed: u64) -> Result<PilotPool> {
    use rand::RngCore;
    let pool_seed = child_rng(root_seed, TAG_PILOTS, 0, 0).next_u64();
    generate_pilot_pool(cfg.pilot_len, cfg.pilots, pool_seed)
}

/// Users and noise from `seed` over a given pilot pool.
pub fn draw_instance_with_pool(cfg: &SystemConfig, pool: &PilotPool, seed: u64) -> Result<Instance> {
    cfg.validate()?;
    if pool.len() != cfg.pilot_len || pool.count() != cfg.pilots {
        return Err(Error::InvalidDimension(format!(
            "pool is {}x{}, config wants {}x{}",
            pool.len(),
            pool.count(),
            cfg.pilot_len,
            cfg.pilots
        )));
    }
    let ext = build_extended_matrix(pool, cfg.max_delay);
    let psi = dft_transform_matrix(cfg.antennas());
    let mut rng = child_rng(seed, TAG_USERS, 0, 0);
    let users = sample_actives(cfg.active, &cfg.channel, cfg.pilots, cfg.max_delay, &mut rng)?;
    let truth = assemble_ground_truth(&users, &ext, &psi)?;
    let mut rng = child_rng(seed, TAG_NOISE, 0, 0);
    let measurement = synthesize_received(&ext, &truth, cfg.snr_db, &mut rng)?;
    let system = realify(ext.matrix(), &measurement.y_hat)?;
    Ok(Instance {
        ext,
        psi,
        truth,
        measurement,
        system,
    })
}

/// Stand-alone instance whose pool also comes from `seed`.
pub fn draw_instance(cfg: &SystemConfig, seed: u64) -> Result<Instance> {
    cfg.validate()?;
    draw_instance_with_pool(cfg, &experiment_pool(cfg, seed)?, seed)
}

/// Score and diagnostics of one solver run.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub solver: SolverKind,
    pub report: ScoreReport,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta_x: f64,
    pub detections: Vec<DetectedUser>,
    pub trace: Vec<IterationRecord>,
}

/// Solver noise variance per real entry for a measurement.
pub fn solver_sigma2(cfg: &SystemConfig, m: &Measurement) -> f64 {
    if m.sigma2 > 0.0 {
        m.sigma2 / 2.0
    } else {
        cfg.noiseless_sigma2
    }
}

pub fn solve_instance(cfg: &SystemConfig, inst: &Instance, kind: SolverKind) -> Result<TrialOutcome> {
    let solver_cfg = SolverConfig {
        sigma2: solver_sigma2(cfg, &inst.measurement),
        ..cfg.solver
    };
    let out = solve(kind, &inst.system, &solver_cfg)?;
    let x_est = complexify(&out.x_map);
    let theta1 = cfg.detector.theta1_for(cfg.snr_db);
    let rows = detect_rows(&x_est, theta1);
    let mut detections = detect_users(&x_est, &inst.ext, &inst.psi, theta1, &cfg.detector)?;
    let report = match_and_score(
        &inst.truth,
        &inst.ext,
        &inst.psi,
        &x_est,
        &mut detections,
        &rows,
        &cfg.detector,
    )?;
    Ok(TrialOutcome {
        solver: kind,
        report,
        iterations: out.iterations,
        converged: out.converged,
        final_delta_x: out.trace.last().map_or(f64::NAN, |r| r.delta_x),
        detections,
        trace: out.trace,
    })
}

/// Full pipeline for one solver. Non-convergence is flagged, not an error.
pub fn run_trial(cfg: &SystemConfig, kind: SolverKind, seed: u64) -> Result<TrialOutcome> {
    let inst = draw_instance(cfg, seed)?;
    solve_instance(cfg, &inst, kind)
}

/// Verbose text dump of one trial: the users, then one block per solver.
pub fn simulate_report(cfg: &SystemConfig, solvers: &[SolverKind], seed: u64) -> Result<String> {
    use std::fmt::Write as _;
    let inst = draw_instance(cfg, seed)?;
    let users: Vec<UserRealization> = inst.truth.users.clone();
    let mut out = format!(
        "# seed {seed}\n# L_hat={} N_hat={} M={} K={} snr_db={} sigma2={:e}\n",
        inst.ext.rows(),
        inst.ext.cols(),
        cfg.antennas(),
        cfg.active,
        cfg.snr_db,
        inst.measurement.sigma2
    );
    out.push_str(&crate::channel::dump_users(&users));
    for &kind in solvers {
        let t = solve_instance(cfg, &inst, kind)?;
        writeln!(
            out,
            "\n## {kind}: mu_ad={} nmse_ce_db={:.3} detected={}/{} false_rows={} iterations={} converged={}",
            t.report.mu_ad,
            t.report.nmse_ce_db,
            t.report.detected_count,
            t.report.truth_count,
            t.report.false_rows,
            t.iterations,
            t.converged
        )
        .unwrap();
        out.push_str(&crate::detect::report_text(&t.detections));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    K,
    L,
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "t_m")]
    Tm,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "K",
            SweepParam::L => "L",
            SweepParam::SnrDb => "snr_db",
            SweepParam::Tm => "t_m",
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let as_count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} needs a non-negative integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepParam::K => cfg.active = as_count()?,
            SweepParam::L => cfg.pilot_len = as_count()?,
            SweepParam::Tm => cfg.max_delay = as_count()?,
            SweepParam::SnrDb => cfg.snr_db = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    /// CSV path; plots go next to it.
    pub output: PathBuf,
    pub sweep: SweepSpec,
    pub system: SystemConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("at least one solver is required".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        for &v in &self.sweep.values {
            self.sweep.param.apply(&self.system, v)?;
        }
        Ok(())
    }
}

/// Aggregate of one (sweep value, solver) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub solver: SolverKind,
    pub trials: usize,
    pub mu_ad_mean: f64,
    pub mu_ad_se: f64,
    pub nmse_ce_db_mean: f64,
    pub nmse_ce_db_se: f64,
    pub avg_iters: f64,
    pub nonconverged: usize,
}

pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "solver",
    "trials",
    "mu_ad_mean",
    "mu_ad_se",
    "nmse_ce_db_mean",
    "nmse_ce_db_se",
    "avg_iters",
    "nonconverged",
];

impl SweepRow {
    fn record(&self) -> [String; 10] {
        [
            self.sweep_param.clone(),
            self.sweep_value.to_string(),
            self.solver.to_string(),
            self.trials.to_string(),
            self.mu_ad_mean.to_string(),
            self.mu_ad_se.to_string(),
            self.nmse_ce_db_mean.to_string(),
            self.nmse_ce_db_se.to_string(),
            self.avg_iters.to_string(),
            self.nonconverged.to_string(),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        let field = |i: usize| r.get(i).ok_or_else(|| Error::Format(format!("missing column {i}")));
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::Format(format!("bad number in column {}", CSV_HEADER[i])))
        };
        let count = |i: usize| -> Result<usize> {
            field(i)?
                .parse()
                .map_err(|_| Error::Format(format!("bad count in column {}", CSV_HEADER[i])))
        };
        Ok(Self {
            sweep_param: field(0)?.to_string(),
            sweep_value: num(1)?,
            solver: field(2)?.parse()?,
            trials: count(3)?,
            mu_ad_mean: num(4)?,
            mu_ad_se: num(5)?,
            nmse_ce_db_mean: num(6)?,
            nmse_ce_db_se: num(7)?,
            avg_iters: num(8)?,
            nonconverged: count(9)?,
        })
    }
}

/// Mean and standard error, summed in slice order.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates trial outcomes (already in trial-index order) of one solver.
pub fn aggregate(param: SweepParam, value: f64, kind: SolverKind, outcomes: &[TrialOutcome]) -> SweepRow {
    let mu: Vec<f64> = outcomes.iter().map(|o| o.report.mu_ad).collect();
    let nmse: Vec<f64> = outcomes.iter().map(|o| o.report.nmse_ce_db).collect();
    let (mu_ad_mean, mu_ad_se) = mean_se(&mu);
    let (nmse_ce_db_mean, nmse_ce_db_se) = mean_se(&nmse);
    SweepRow {
        sweep_param: param.name().to_string(),
        sweep_value: value,
        solver: kind,
        trials: outcomes.len(),
        mu_ad_mean,
        mu_ad_se,
        nmse_ce_db_mean,
        nmse_ce_db_se,
        avg_iters: outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / outcomes.len() as f64,
        nonconverged: outcomes.iter().filter(|o| !o.converged).count(),
    }
}

/// Runs every trial of one sweep point for all solvers over the experiment's
/// pilot pool. Result is indexed `[solver][trial]`.
pub fn run_point(
    cfg: &SystemConfig,
    solvers: &[SolverKind],
    root_seed: u64,
    point: usize,
    trials: usize,
) -> Result<Vec<Vec<TrialOutcome>>> {
    cfg.validate()?;
    let pool = experiment_pool(cfg, root_seed)?;
    let per_trial: Vec<Vec<TrialOutcome>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = draw_instance_with_pool(cfg, &pool, trial_seed(root_seed, point, t))?;
            solvers.iter().map(|&k| solve_instance(cfg, &inst, k)).collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..solvers.len())
        .map(|s| per_trial.iter().map(|t| t[s].clone()).collect())
        .collect())
}

/// Runs the sweep, writing CSV rows to `out` as each point completes.
pub fn run_sweep_to<W: Write>(spec: &ExperimentSpec, out: W) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    writer.flush().map_err(|e| Error::Format(e.to_string()))?;
    let mut rows = Vec::new();
    for (point, &value) in spec.sweep.values.iter().enumerate() {
        let cfg = spec.sweep.param.apply(&spec.system, value)?;
        let outcomes = run_point(&cfg, &spec.solvers, spec.seed, point, spec.trials)?;
        for (&kind, runs) in spec.solvers.iter().zip(&outcomes) {
            let row = aggregate(spec.sweep.param, value, kind, runs);
            writer.write_record(row.record()).map_err(csv_err)?;
            rows.push(row);
        }
        writer.flush().map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(rows)
}

/// Runs the sweep into `spec.output`. Completed points stay on disk if a
/// later point fails.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    if let Some(dir) = spec.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(&spec.output).map_err(|e| Error::io(&spec.output, e))?;
    run_sweep_to(spec, file)
}

/// Rows in the sweep CSV schema.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).unwrap();
    for r in rows {
        writer.write_record(r.record()).unwrap();
    }
    String::from_utf8(writer.into_inner().unwrap()).unwrap()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file)
}

pub fn parse_csv(input: impl std::io::Read) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    reader
        .records()
        .map(|r| SweepRow::from_record(&r.map_err(|e| Error::Format(e.to_string()))?))
        .collect()
}

/// One SVG per metric (`mu_ad.svg`, `nmse_ce_db.svg`) in `dir`: the metric
/// against the swept parameter, one series per solver, standard-error bars.
pub fn emit_plots(rows: &[SweepRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Config("no results to plot".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    type Metric = fn(&SweepRow) -> (f64, f64);
    let metrics: [(&str, &str, Metric); 2] = [
        ("mu_ad", "mu_AD", |r| (r.mu_ad_mean, r.mu_ad_se)),
        ("nmse_ce_db", "NMSE_CE (dB)", |r| (r.nmse_ce_db_mean, r.nmse_ce_db_se)),
    ];
    let mut written = Vec::new();
    for (stem, label, get) in metrics {
        let path = dir.join(format!("{stem}.svg"));
        draw_metric(rows, &path, label, get)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { lo.abs().max(1.0) * 0.1 };
    (lo - pad, hi + pad)
}

fn draw_metric(
    rows: &[SweepRow],
    path: &Path,
    label: &str,
    get: fn(&SweepRow) -> (f64, f64),
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let finite = |x: f64| x.is_finite();
    let xs: Vec<f64> = rows.iter().map(|r| r.sweep_value).filter(|&x| finite(x)).collect();
    let ys: Vec<(f64, f64)> = rows.iter().map(get).filter(|(m, s)| finite(*m) && finite(*s)).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err("no finite points".into());
    }
    let (x0, x1) = padded(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        ys.iter().map(|(m, s)| m - s).fold(f64::INFINITY, f64::min),
        ys.iter().map(|(m, s)| m + s).fold(f64::NEG_INFINITY, f64::max),
    );

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc(rows[0].sweep_param.as_str())
        .y_desc(label)
        .draw()?;

    let mut solvers: Vec<SolverKind> = rows.iter().map(|r| r.solver).collect();
    solvers.sort();
    solvers.dedup();
    for (i, kind) in solvers.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter(|r| r.solver == kind)
            .map(|r| {
                let (m, s) = get(r);
                (r.sweep_value, m, s)
            })
            .filter(|(x, m, s)| finite(*x) && finite(*m) && finite(*s))
            .collect();
        chart
            .draw_series(LineSeries::new(pts.iter().map(|&(x, m, _)| (x, m)), color.stroke_width(2)))?
            .label(kind.name())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart.draw_series(pts.iter().map(|&(x, m, _)| Circle::new((x, m), 4, color.filled())))?;
        chart.draw_series(
            pts.iter()
                .map(|&(x, m, s)| ErrorBar::new_vertical(x, m - s, m, m + s, color, 8)),
        )?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
