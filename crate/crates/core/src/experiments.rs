//! Launch-power sweeps and the minimum-steps-per-span search, plus the CSV and
//! JSON files they are stored in.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::propagate_link;
use crate::config::{Compensation, DbpSpec, ModulationFormat, SystemConfig};
use crate::equalizer::{dbp, edc, DbpContext, EqualizerError};
use crate::metrics::{estimate_snr, MetricsError, MetricsReport};
use crate::modem::{constellation_for, decorrelate_polarizations, generate_frame, ModemError, SymbolFrame};
use crate::sigproc::{
    matched_filter_downsample, multiplex, set_launch_power, shape_channel, ChannelPlan, RrcSpec, SampledField,
    SigprocError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Sigproc(#[from] SigprocError),
    #[error(transparent)]
    Equalizer(#[from] EqualizerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
    #[error("{path}: unknown columns {columns:?}")]
    UnknownColumns { path: String, columns: Vec<String> },
    #[error("{path}: missing columns {columns:?}")]
    MissingColumns { path: String, columns: Vec<String> },
}

/// Metric used to rank step counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Snr,
    Air,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Snr => "snr",
            Criterion::Air => "air",
        })
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "snr" => Ok(Criterion::Snr),
            "air" => Ok(Criterion::Air),
            _ => Err(format!("unknown criterion '{s}' (expected snr or air)")),
        }
    }
}

/// One scored pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub format: ModulationFormat,
    pub launch_power_dbm: f64,
    pub compensation: Compensation,
    pub seed: u64,
    /// `None` when the pipeline failed for this point.
    pub report: Option<MetricsReport>,
    pub wallclock_s: Option<f64>,
}

impl SweepPoint {
    /// Back-propagated bandwidth in Hz, 0 for EDC.
    pub fn dbp_bandwidth(&self) -> f64 {
        self.compensation.dbp().map_or(0.0, |s| s.bandwidth)
    }

    /// DBP steps per span, 0 for EDC.
    pub fn dbp_steps_per_span(&self) -> usize {
        self.compensation.dbp().map_or(0, |s| s.steps_per_span)
    }

    pub fn metric(&self, criterion: Criterion) -> Option<f64> {
        self.report.as_ref().map(|r| match criterion {
            Criterion::Snr => r.snr_db,
            Criterion::Air => r.air_per_channel,
        })
    }

    pub fn record(&self) -> SweepRecord {
        SweepRecord {
            format: self.format,
            power_dbm: self.launch_power_dbm,
            bandwidth_ghz: self.dbp_bandwidth() / 1e9,
            steps_per_span: self.dbp_steps_per_span(),
            snr_db: self.report.as_ref().map(|r| r.snr_db),
            mi_bits: self.report.as_ref().map(|r| r.mi_bits_per_2d_symbol),
            air_tbps: self.report.as_ref().map(|r| r.air_total / 1e12),
            seed: self.seed,
            wallclock_s: self.wallclock_s,
        }
    }
}

/// One row of a results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub format: ModulationFormat,
    pub power_dbm: f64,
    /// 0 for EDC
    pub bandwidth_ghz: f64,
    /// 0 for EDC
    pub steps_per_span: usize,
    pub snr_db: Option<f64>,
    pub mi_bits: Option<f64>,
    /// Total over all channels.
    pub air_tbps: Option<f64>,
    pub seed: u64,
    pub wallclock_s: Option<f64>,
}

impl SweepRecord {
    pub fn is_edc(&self) -> bool {
        self.steps_per_span == 0
    }

    /// Curve label, e.g. `DP-16QAM EDC` or `DP-16QAM DBP 96.1 GHz x25`.
    pub fn series(&self) -> String {
        if self.is_edc() {
            format!("{} EDC", self.format)
        } else {
            format!("{} DBP {:.1} GHz x{}", self.format, self.bandwidth_ghz, self.steps_per_span)
        }
    }
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "format",
    "power_dbm",
    "bandwidth_ghz",
    "steps_per_span",
    "snr_db",
    "mi_bits",
    "air_tbps",
    "seed",
    "wallclock_s",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_timing: bool,
}

/// Transmitted symbols and the launched waveform at unit per-channel power.
struct Transmitted {
    frames: Vec<SymbolFrame>,
    field: SampledField,
}

fn transmit(cfg: &SystemConfig, format: ModulationFormat) -> Result<Transmitted, ExperimentError> {
    let wdm = &cfg.wdm;
    let c = constellation_for(format);
    let rrc = RrcSpec::from_rate(wdm.symbol_rate, wdm.rolloff);
    let frames = (0..wdm.n_channels)
        .map(|ch| decorrelate_polarizations(generate_frame(ch, &c, wdm.n_symbols, cfg.master_seed)))
        .collect::<Result<Vec<_>, _>>()?;
    let fields = frames
        .iter()
        .map(|f| shape_channel(f, rrc, wdm.sample_rate()))
        .collect::<Result<Vec<_>, _>>()?;
    let field = multiplex(&fields, wdm.channel_spacing)?;
    Ok(Transmitted { frames, field })
}

fn plan(cfg: &SystemConfig) -> ChannelPlan {
    ChannelPlan {
        n_channels: cfg.wdm.n_channels,
        spacing: cfg.wdm.channel_spacing,
    }
}

/// Applies the receiver compensation and scores the centre channel.
fn score(
    cfg: &SystemConfig,
    format: ModulationFormat,
    tx: &Transmitted,
    rx: &SampledField,
    power_dbm: f64,
    compensation: &Compensation,
) -> Result<MetricsReport, ExperimentError> {
    let wdm = &cfg.wdm;
    let plan = plan(cfg);
    let compensated = match compensation {
        Compensation::Edc => edc(rx, &cfg.link, wdm.centre_wavelength),
        Compensation::Dbp(spec) => {
            let ctx = DbpContext {
                plan,
                symbol_rate: wdm.symbol_rate,
                wavelength: wdm.centre_wavelength,
                launch_power_dbm: power_dbm,
            };
            dbp(rx, spec, &cfg.link, &ctx)?
        }
    };
    let centre = plan.centre_index();
    let rrc = RrcSpec::from_rate(wdm.symbol_rate, wdm.rolloff);
    let symbols = matched_filter_downsample(&compensated, centre, &plan, rrc)?;
    let sent = &tx.frames[centre];
    let snr = estimate_snr([&sent.x_pol, &sent.y_pol], [&symbols.x_pol, &symbols.y_pol])?;
    Ok(MetricsReport::from_snr(snr, &constellation_for(format), wdm, sent.len()))
}

/// Runs one forward transmission per (format, power) and scores it under every
/// compensation. Points come back ordered by format, compensation, then power,
/// independently of the number of worker threads.
pub fn run_grid(
    cfg: &SystemConfig,
    formats: &[ModulationFormat],
    powers: &[f64],
    compensations: &[Compensation],
    options: RunOptions,
) -> Vec<SweepPoint> {
    let mut powers = powers.to_vec();
    powers.sort_by(f64::total_cmp);
    let transmitted: Vec<(ModulationFormat, Result<Transmitted, String>)> = formats
        .par_iter()
        .map(|&f| (f, transmit(cfg, f).map_err(|e| e.to_string())))
        .collect();
    let jobs: Vec<(usize, f64)> = (0..formats.len())
        .flat_map(|fi| powers.iter().map(move |&p| (fi, p)))
        .collect();
    let results: Vec<Vec<SweepPoint>> = jobs
        .par_iter()
        .map(|&(fi, power)| {
            let (format, tx) = &transmitted[fi];
            run_point(cfg, *format, tx, power, compensations, options)
        })
        .collect();
    let mut points: Vec<SweepPoint> = results.into_iter().flatten().collect();
    let comp_index = |c: &Compensation| compensations.iter().position(|x| x == c).unwrap_or(0);
    let fmt_index = |f: ModulationFormat| formats.iter().position(|x| *x == f).unwrap_or(0);
    points.sort_by(|a, b| {
        fmt_index(a.format)
            .cmp(&fmt_index(b.format))
            .then(comp_index(&a.compensation).cmp(&comp_index(&b.compensation)))
            .then(a.launch_power_dbm.total_cmp(&b.launch_power_dbm))
    });
    points
}

fn run_point(
    cfg: &SystemConfig,
    format: ModulationFormat,
    tx: &Result<Transmitted, String>,
    power: f64,
    compensations: &[Compensation],
    options: RunOptions,
) -> Vec<SweepPoint> {
    let start = Instant::now();
    let point = |compensation: &Compensation, report: Option<MetricsReport>, secs: f64| SweepPoint {
        format,
        launch_power_dbm: power,
        compensation: compensation.clone(),
        seed: cfg.master_seed,
        report,
        wallclock_s: options.record_timing.then_some(secs),
    };
    let fail = |what: &str| {
        compensations
            .iter()
            .map(|c| {
                log::error!("{format} at {power} dBm, {}: {what}", c.label(cfg.wdm.channel_spacing));
                point(c, None, 0.0)
            })
            .collect()
    };
    let tx = match tx {
        Ok(tx) => tx,
        Err(e) => return fail(e),
    };
    let launched = match set_launch_power(&tx.field, power, cfg.wdm.n_channels) {
        Ok(f) => f,
        Err(e) => return fail(&e.to_string()),
    };
    let rx = propagate_link(&launched, &cfg.link, cfg.wdm.centre_wavelength, cfg.master_seed);
    let forward_s = start.elapsed().as_secs_f64();
    compensations
        .iter()
        .map(|c| {
            let t = Instant::now();
            let report = match score(cfg, format, tx, &rx, power, c) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::error!("{format} at {power} dBm, {}: {e}", c.label(cfg.wdm.channel_spacing));
                    None
                }
            };
            point(c, report, forward_s + t.elapsed().as_secs_f64())
        })
        .collect()
}

/// One pipeline run per power for the configured format and compensation.
pub fn power_sweep(cfg: &SystemConfig, powers: &[f64]) -> Vec<SweepPoint> {
    run_grid(
        cfg,
        &[cfg.wdm.format],
        powers,
        std::slice::from_ref(&cfg.compensation),
        RunOptions::default(),
    )
}

/// Best successful point; ties go to the lower launch power. Warns when the
/// best point sits at the edge of the swept range.
pub fn find_optimum(points: &[SweepPoint], criterion: Criterion) -> Option<&SweepPoint> {
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.report.is_some()).collect();
    let mut best: Option<&SweepPoint> = None;
    for p in &ok {
        let better = match best {
            None => true,
            Some(b) => {
                let (m, mb) = (p.metric(criterion).unwrap(), b.metric(criterion).unwrap());
                m > mb || (m == mb && p.launch_power_dbm < b.launch_power_dbm)
            }
        };
        if better {
            best = Some(p);
        }
    }
    if let Some(b) = best {
        let lo = ok.iter().map(|p| p.launch_power_dbm).fold(f64::INFINITY, f64::min);
        let hi = ok.iter().map(|p| p.launch_power_dbm).fold(f64::NEG_INFINITY, f64::max);
        if ok.len() > 1 && (b.launch_power_dbm == lo || b.launch_power_dbm == hi) {
            log::warn!(
                "optimum at {} dBm lies on the edge of the swept range [{lo}, {hi}] dBm",
                b.launch_power_dbm
            );
        }
    }
    best
}

/// Outcome of the minimum-steps-per-span search for one (format, bandwidth, criterion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrnspsResult {
    pub format: ModulationFormat,
    /// Hz
    pub bandwidth: f64,
    pub criterion: Criterion,
    pub ladder: Vec<usize>,
    /// Peak metric at each ladder entry; dB for SNR, bit/s per channel for AIR.
    pub peaks: Vec<f64>,
    pub reference_steps: usize,
    pub reference_value: f64,
    /// Same unit as `peaks`.
    pub tolerance: f64,
    pub chosen_steps: usize,
    /// True when no ladder entry came within tolerance of the reference.
    pub saturated: bool,
}

/// Absolute tolerance for `criterion` in the unit of [`SweepPoint::metric`].
pub fn tolerance_for(cfg: &SystemConfig, format: ModulationFormat, criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Snr => cfg.experiment.snr_tolerance_db,
        Criterion::Air => {
            let ceiling = 2.0 * cfg.wdm.symbol_rate * format.bits_per_symbol() as f64;
            cfg.experiment.air_tolerance_fraction * ceiling
        }
    }
}

/// DBP settings covering the ladder plus the forward step count, for each bandwidth.
pub fn ladder_compensations(cfg: &SystemConfig, bandwidths: &[f64], ladder: &[usize]) -> Vec<Compensation> {
    let base = cfg.compensation.dbp().cloned();
    let mut steps: Vec<usize> = ladder.to_vec();
    steps.push(cfg.link.fiber.steps_per_span);
    steps.sort_unstable();
    steps.dedup();
    bandwidths
        .iter()
        .flat_map(|&bw| {
            let base = base.clone();
            steps.iter().map(move |&s| {
                let mut spec = base
                    .clone()
                    .unwrap_or_else(|| DbpSpec::channels(1, bw, s));
                spec.bandwidth = bw;
                spec.steps_per_span = s;
                Compensation::Dbp(spec)
            })
        })
        .collect()
}

/// Picks the smallest ladder entry whose peak metric reaches the reference
/// peak minus `tolerance`, from points produced by [`run_grid`] over
/// [`ladder_compensations`].
pub fn mrnsps_from_points(
    points: &[SweepPoint],
    format: ModulationFormat,
    bandwidth: f64,
    criterion: Criterion,
    ladder: &[usize],
    reference_steps: usize,
    tolerance: f64,
) -> Option<MrnspsResult> {
    let peak = |steps: usize| {
        let sel: Vec<SweepPoint> = points
            .iter()
            .filter(|p| {
                p.format == format
                    && p.dbp_steps_per_span() == steps
                    && (p.dbp_bandwidth() - bandwidth).abs() <= 1e-6 * bandwidth
            })
            .cloned()
            .collect();
        find_optimum(&sel, criterion).and_then(|p| p.metric(criterion))
    };
    let reference_value = peak(reference_steps)?;
    let peaks: Vec<f64> = ladder.iter().map(|&s| peak(s)).collect::<Option<_>>()?;
    let hit = ladder
        .iter()
        .zip(&peaks)
        .find(|(_, &v)| v >= reference_value - tolerance)
        .map(|(&s, _)| s);
    Some(MrnspsResult {
        format,
        bandwidth,
        criterion,
        ladder: ladder.to_vec(),
        peaks,
        reference_steps,
        reference_value,
        tolerance,
        chosen_steps: hit.unwrap_or(reference_steps),
        saturated: hit.is_none(),
    })
}

/// Full search for one (format, bandwidth, criterion). Every ladder entry sees
/// the same transmitted data and noise realisation.
pub fn mrnsps_search(
    cfg: &SystemConfig,
    bandwidth: f64,
    format: ModulationFormat,
    criterion: Criterion,
    powers: &[f64],
) -> Option<MrnspsResult> {
    let ladder = &cfg.experiment.ladder;
    let comps = ladder_compensations(cfg, &[bandwidth], ladder);
    let points = run_grid(cfg, &[format], powers, &comps, RunOptions::default());
    mrnsps_from_points(
        &points,
        format,
        bandwidth,
        criterion,
        ladder,
        cfg.link.fiber.steps_per_span,
        tolerance_for(cfg, format, criterion),
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> ExperimentError {
    ExperimentError::Format {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(SWEEP_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let unknown: Vec<String> = headers
        .iter()
        .filter(|h| !SWEEP_COLUMNS.contains(h))
        .map(str::to_string)
        .collect();
    if !unknown.is_empty() {
        return Err(ExperimentError::UnknownColumns {
            path: path.display().to_string(),
            columns: unknown,
        });
    }
    let missing: Vec<String> = SWEEP_COLUMNS
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingColumns {
            path: path.display().to_string(),
            columns: missing,
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_mrnsps_json(path: &Path, results: &[MrnspsResult]) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(results).expect("results serialise");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_mrnsps_json(path: &Path) -> Result<Vec<MrnspsResult>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Format {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Formats x bandwidths table of chosen step counts, one block per criterion.
/// Saturated searches are marked with a trailing `+`.
pub fn mrnsps_table_csv(results: &[MrnspsResult]) -> String {
    let mut bandwidths: Vec<f64> = results.iter().map(|r| r.bandwidth).collect();
    bandwidths.sort_by(f64::total_cmp);
    bandwidths.dedup();
    let mut out = String::from("criterion,format");
    for bw in &bandwidths {
        out.push_str(&format!(",{} GHz", bw / 1e9));
    }
    out.push('\n');
    for criterion in [Criterion::Air, Criterion::Snr] {
        for format in ModulationFormat::ALL {
            let cells: Vec<Option<&MrnspsResult>> = bandwidths
                .iter()
                .map(|bw| {
                    results
                        .iter()
                        .find(|r| r.criterion == criterion && r.format == format && r.bandwidth == *bw)
                })
                .collect();
            if cells.iter().all(Option::is_none) {
                continue;
            }
            out.push_str(&format!("{},{}", criterion.to_string().to_uppercase(), format.name()));
            for c in cells {
                match c {
                    Some(r) if r.saturated => out.push_str(&format!(",{}+", r.chosen_steps)),
                    Some(r) => out.push_str(&format!(",{}", r.chosen_steps)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}
