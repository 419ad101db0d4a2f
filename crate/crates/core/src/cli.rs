//! Command-line front end: `simulate`, `sweep-power`, `optimize-steps` and `report`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{
    load_config_file, Compensation, ConfigError, DbpSpec, ModulationFormat, ScalePreset, SystemConfig,
};
use crate::experiments::{
    find_optimum, ladder_compensations, mrnsps_from_points, mrnsps_table_csv, read_sweep_csv, run_grid,
    tolerance_for, write_mrnsps_json, write_sweep_csv, Criterion, ExperimentError, MrnspsResult, RunOptions,
    SweepPoint, SweepRecord,
};
use crate::metrics::MetricsReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wdm-nlc", version, about = "Nyquist-WDM transmission simulator with digital back-propagation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline once at the configured launch power and compensation.
    Simulate(CommonArgs),
    /// Sweep launch power for one or more compensation settings.
    SweepPower(SweepArgs),
    /// Find the minimum DBP steps per span under the SNR and/or AIR criterion.
    OptimizeSteps(OptimizeArgs),
    /// Summarise a results CSV and draw SNR and AIR versus launch power.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration, used when no file is given.
    #[arg(long, value_parser = ["paper", "desk"], default_value = "desk")]
    pub preset: String,
    /// Dotted-key override applied after loading, e.g. `link.n_spans=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Fill the wallclock_s column (makes output run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Launch powers per channel in dBm as start:stop:step, stop inclusive.
    #[arg(long, allow_hyphen_values = true, default_value = "-10:4:2")]
    pub range: String,
    /// Comma-separated compensations: `edc`, `dbp<k>` for k back-propagated channels, or `full`.
    #[arg(long, default_value = "edc,full")]
    pub compensation: String,
    /// DBP steps per span; defaults to the configured DBP steps, else the forward count.
    #[arg(long)]
    pub dbp_steps: Option<usize>,
    /// Comma-separated formats (QPSK, 16QAM, 64QAM, 256QAM); defaults to the configured one.
    #[arg(long)]
    pub formats: Option<String>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `snr`, `air` or `both`.
    #[arg(long, default_value = "both")]
    pub criterion: String,
    /// Comma-separated numbers of back-propagated channels; defaults to every odd count.
    #[arg(long)]
    pub bandwidths: Option<String>,
    /// Comma-separated formats; defaults to the configured one.
    #[arg(long)]
    pub formats: Option<String>,
    /// Comma-separated ascending step counts; defaults to `experiment.ladder`.
    #[arg(long)]
    pub ladder: Option<String>,
    /// Launch powers searched for each peak, start:stop:step in dBm.
    #[arg(long, allow_hyphen_values = true, default_value = "-4:10:2")]
    pub range: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results CSV written by `sweep-power` or `simulate`.
    pub results: PathBuf,
    /// Directory for the SVG plots; defaults to the directory of the results file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code and the files a command wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Experiment(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `start:stop:step` into an inclusive, ascending list of powers.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{spec}' is not start:stop:step"));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("range '{spec}': '{s}' is not a number"))
    };
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) {
        return Err(format!("range '{spec}': step must be positive"));
    }
    if stop < start {
        return Err(format!("range '{spec}': stop is below start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 10_000 {
        return Err(format!("range '{spec}' has {n} points"));
    }
    // rounding keeps e.g. -10 + 7 * 0.2 from printing as -8.599999999999998
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn parse_list<T, F>(spec: &str, what: &str, parse: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&str) -> Result<T, String>,
{
    let items: Vec<T> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| usage(format!("{what}: {e}"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(usage(format!("{what}: empty list")));
    }
    Ok(items)
}

fn parse_formats(spec: Option<&str>, cfg: &SystemConfig) -> Result<Vec<ModulationFormat>, CliError> {
    match spec {
        None => Ok(vec![cfg.wdm.format]),
        Some(s) => parse_list(s, "--formats", |f| f.parse::<ModulationFormat>().map_err(|e| e.to_string())),
    }
}

/// Parses a compensation list entry: `edc`, `full` or `dbp<k>`.
fn parse_compensation(item: &str, cfg: &SystemConfig, steps: usize) -> Result<Compensation, String> {
    let base = cfg.compensation.dbp().cloned();
    let dbp = |k: usize| {
        let mut spec = base
            .clone()
            .unwrap_or_else(|| DbpSpec::channels(k, cfg.wdm.channel_spacing, steps));
        spec.bandwidth = k as f64 * cfg.wdm.channel_spacing;
        spec.steps_per_span = steps;
        spec
    };
    let lower = item.to_ascii_lowercase();
    let spec = match lower.as_str() {
        "edc" => return Ok(Compensation::Edc),
        "full" => dbp(cfg.wdm.n_channels),
        other => {
            let k = other
                .strip_prefix("dbp")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| format!("'{item}' is not edc, full or dbp<k>"))?;
            dbp(k)
        }
    };
    spec.validate(&cfg.wdm).map_err(|e| e.to_string())?;
    Ok(Compensation::Dbp(spec))
}

/// Loads the configuration named by the common flags and applies overrides.
pub fn load(common: &CommonArgs) -> Result<SystemConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => load_config_file(path)?,
        None => SystemConfig::preset(common.preset.parse::<ScalePreset>().map_err(usage)?),
    };
    cfg.apply_env_overrides()?;
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if cfg.scale_preset == ScalePreset::Paper {
        eprintln!(
            "warning: paper-scale configuration ({} channels, {} spans x {} steps, 2^{} symbols); \
             each forward transmission takes hours on one core",
            cfg.wdm.n_channels,
            cfg.link.n_spans,
            cfg.link.fiber.steps_per_span,
            cfg.wdm.n_symbols.trailing_zeros()
        );
    }
    Ok(cfg)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| usage(format!("cannot start {n} workers: {e}"))),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str, artifacts: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

/// Run metadata written next to every result file.
#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    overrides: &'a [String],
    config: &'a SystemConfig,
}

fn write_metadata(
    dir: &Path,
    name: &str,
    command: &str,
    common: &CommonArgs,
    cfg: &SystemConfig,
    artifacts: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let meta = Metadata {
        command,
        overrides: &common.overrides,
        config: cfg,
    };
    let text = toml::to_string(&meta).expect("metadata serialises");
    write_file(&dir.join(name), &text, artifacts)
}

fn write_points(path: &Path, points: &[SweepPoint], artifacts: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let records: Vec<SweepRecord> = points.iter().map(SweepPoint::record).collect();
    write_sweep_csv(path, &records)?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

fn outcome(points: &[SweepPoint], artifacts: Vec<PathBuf>) -> CommandOutcome {
    let failed = points.iter().filter(|p| p.report.is_none()).count();
    if failed > 0 {
        eprintln!("error: {failed} of {} points failed", points.len());
    }
    CommandOutcome {
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_RUNTIME },
        artifacts,
    }
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<CommandOutcome, CliError> {
    let cfg = load(args)?;
    let options = RunOptions {
        record_timing: args.record_timing,
    };
    let points = with_workers(args.workers, || {
        run_grid(
            &cfg,
            &[cfg.wdm.format],
            &[cfg.launch_power_dbm],
            std::slice::from_ref(&cfg.compensation),
            options,
        )
    })?;
    create_dir(&args.out)?;
    let mut artifacts = Vec::new();
    write_points(&args.out.join("simulate.csv"), &points, &mut artifacts)?;
    write_metadata(&args.out, "simulate.meta.toml", "simulate", args, &cfg, &mut artifacts)?;
    if let Some(report) = points.first().and_then(|p| p.report.as_ref()) {
        println!("{}", MetricsReport::CSV_HEADER);
        println!("{}", report.csv_row());
        write_file(&args.out.join("simulate.report.toml"), &report.to_toml_string(), &mut artifacts)?;
    }
    Ok(outcome(&points, artifacts))
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Groups records into curves keyed by series label, each sorted by power.
fn curves(records: &[SweepRecord]) -> Vec<(String, Vec<&SweepRecord>)> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        let key = r.series();
        if !map.contains_key(&key) {
            order.push(key.clone());
        }
        map.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let mut v = map.remove(&k).expect("series present");
            v.sort_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm));
            (k, v)
        })
        .collect()
}

fn curve_files(dir: &Path, records: &[SweepRecord], artifacts: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for (name, rows) in curves(records) {
        let mut snr = String::from("power_dbm,snr_db\n");
        let mut air = String::from("power_dbm,air_tbps\n");
        for r in rows {
            if let (Some(s), Some(a)) = (r.snr_db, r.air_tbps) {
                let _ = writeln!(snr, "{},{}", r.power_dbm, s);
                let _ = writeln!(air, "{},{}", r.power_dbm, a);
            }
        }
        let base = slug(&name);
        write_file(&dir.join(format!("curve_{base}_snr.csv")), &snr, artifacts)?;
        write_file(&dir.join(format!("curve_{base}_air.csv")), &air, artifacts)?;
    }
    Ok(())
}

pub fn cmd_sweep_power(args: &SweepArgs) -> Result<CommandOutcome, CliError> {
    let powers = parse_range(&args.range).map_err(usage)?;
    let cfg = load(&args.common)?;
    let steps = args
        .dbp_steps
        .or(cfg.compensation.dbp().map(|s| s.steps_per_span))
        .unwrap_or(cfg.link.fiber.steps_per_span);
    if steps == 0 {
        return Err(usage("--dbp-steps must be at least 1"));
    }
    let comps = parse_list(&args.compensation, "--compensation", |c| parse_compensation(c, &cfg, steps))?;
    let formats = parse_formats(args.formats.as_deref(), &cfg)?;
    let options = RunOptions {
        record_timing: args.common.record_timing,
    };
    log::info!(
        "sweeping {} formats x {} compensations x {} powers",
        formats.len(),
        comps.len(),
        powers.len()
    );
    let points = with_workers(args.common.workers, || run_grid(&cfg, &formats, &powers, &comps, options))?;
    let out = &args.common.out;
    create_dir(out)?;
    let mut artifacts = Vec::new();
    write_points(&out.join("sweep.csv"), &points, &mut artifacts)?;
    write_metadata(out, "sweep.meta.toml", "sweep-power", &args.common, &cfg, &mut artifacts)?;
    let records: Vec<SweepRecord> = points.iter().map(SweepPoint::record).collect();
    curve_files(out, &records, &mut artifacts)?;
    for f in &formats {
        for c in &comps {
            let sel: Vec<SweepPoint> = points
                .iter()
                .filter(|p| p.format == *f && p.compensation == *c)
                .cloned()
                .collect();
            if let Some(best) = find_optimum(&sel, Criterion::Snr) {
                let r = best.report.as_ref().expect("optimum has a report");
                println!(
                    "{} {}: optimum {} dBm, SNR {:.2} dB, AIR {:.4} Tbit/s",
                    f,
                    c.label(cfg.wdm.channel_spacing),
                    best.launch_power_dbm,
                    r.snr_db,
                    r.air_total / 1e12
                );
            }
        }
    }
    Ok(outcome(&points, artifacts))
}

pub fn cmd_optimize_steps(args: &OptimizeArgs) -> Result<CommandOutcome, CliError> {
    let powers = parse_range(&args.range).map_err(usage)?;
    let criteria = match args.criterion.to_ascii_lowercase().as_str() {
        "both" => vec![Criterion::Air, Criterion::Snr],
        other => vec![other.parse::<Criterion>().map_err(usage)?],
    };
    let mut cfg = load(&args.common)?;
    if let Some(l) = &args.ladder {
        cfg.experiment.ladder = parse_list(l, "--ladder", |s| s.parse::<usize>().map_err(|e| e.to_string()))?;
        cfg.experiment.validate()?;
    }
    let channels: Vec<usize> = match &args.bandwidths {
        Some(b) => parse_list(b, "--bandwidths", |s| s.parse::<usize>().map_err(|e| e.to_string()))?,
        None => (1..=cfg.wdm.n_channels).step_by(2).collect(),
    };
    let spacing = cfg.wdm.channel_spacing;
    for &k in &channels {
        DbpSpec::channels(k, spacing, 1).validate(&cfg.wdm)?;
    }
    let bandwidths: Vec<f64> = channels.iter().map(|&k| k as f64 * spacing).collect();
    let formats = parse_formats(args.formats.as_deref(), &cfg)?;
    let ladder = cfg.experiment.ladder.clone();
    let comps = ladder_compensations(&cfg, &bandwidths, &ladder);
    let options = RunOptions {
        record_timing: args.common.record_timing,
    };
    let points = with_workers(args.common.workers, || run_grid(&cfg, &formats, &powers, &comps, options))?;

    let mut results: Vec<MrnspsResult> = Vec::new();
    for &criterion in &criteria {
        for &format in &formats {
            for &bw in &bandwidths {
                let tol = tolerance_for(&cfg, format, criterion);
                match mrnsps_from_points(&points, format, bw, criterion, &ladder, cfg.link.fiber.steps_per_span, tol)
                {
                    Some(r) => {
                        if r.saturated {
                            log::warn!(
                                "{format}, {} GHz, {criterion}: no ladder entry within tolerance",
                                bw / 1e9
                            );
                        }
                        results.push(r);
                    }
                    None => log::error!("{format}, {} GHz, {criterion}: no successful points", bw / 1e9),
                }
            }
        }
    }

    let out = &args.common.out;
    create_dir(out)?;
    let mut artifacts = Vec::new();
    write_points(&out.join("mrnsps_points.csv"), &points, &mut artifacts)?;
    let json = out.join("mrnsps.json");
    write_mrnsps_json(&json, &results)?;
    artifacts.push(json);
    let table = mrnsps_table_csv(&results);
    write_file(&out.join("mrnsps_table.csv"), &table, &mut artifacts)?;
    write_metadata(out, "mrnsps.meta.toml", "optimize-steps", &args.common, &cfg, &mut artifacts)?;
    print!("{table}");
    let expected = criteria.len() * formats.len() * bandwidths.len();
    let mut result = outcome(&points, artifacts);
    if results.len() != expected {
        result.exit_code = EXIT_RUNTIME;
    }
    Ok(result)
}

/// Fails on two rows with the same parameters but different results.
fn check_consistent(records: &[SweepRecord]) -> Result<(), String> {
    let mut seen: BTreeMap<String, &SweepRecord> = BTreeMap::new();
    for r in records {
        let key = format!(
            "{}|{}|{}|{}|{}",
            r.format, r.power_dbm, r.bandwidth_ghz, r.steps_per_span, r.seed
        );
        if let Some(prev) = seen.insert(key, r) {
            if prev.snr_db != r.snr_db || prev.mi_bits != r.mi_bits || prev.air_tbps != r.air_tbps {
                return Err(format!(
                    "conflicting results for {} at {} dBm",
                    r.series(),
                    r.power_dbm
                ));
            }
        }
    }
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<CommandOutcome, CliError> {
    let records = read_sweep_csv(&args.results).map_err(|e| usage(e.to_string()))?;
    check_consistent(&records).map_err(|e| usage(format!("{}: {e}", args.results.display())))?;
    if records.is_empty() {
        println!("no data in {}", args.results.display());
        return Ok(CommandOutcome {
            exit_code: EXIT_OK,
            artifacts: Vec::new(),
        });
    }
    let dir = args.out.clone().unwrap_or_else(|| {
        args.results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    create_dir(&dir)?;
    let curves = curves(&records);

    println!("{:<36} {:>10} {:>10} {:>12}", "series", "opt dBm", "SNR dB", "AIR Tbit/s");
    for (name, rows) in &curves {
        // highest SNR; ties go to the lower power since rows are sorted by power
        let best = rows
            .iter()
            .filter(|r| r.snr_db.is_some())
            .fold(None::<&&SweepRecord>, |acc, r| match acc {
                Some(b) if b.snr_db >= r.snr_db => Some(b),
                _ => Some(r),
            });
        match best {
            Some(b) => println!(
                "{:<36} {:>10} {:>10.2} {:>12.4}",
                name,
                b.power_dbm,
                b.snr_db.unwrap_or(f64::NAN),
                b.air_tbps.unwrap_or(f64::NAN)
            ),
            None => println!("{name:<36} {:>10} {:>10} {:>12}", "-", "-", "-"),
        }
    }

    let series = |pick: fn(&SweepRecord) -> Option<f64>| -> Vec<Series> {
        curves
            .iter()
            .map(|(name, rows)| Series {
                name: name.clone(),
                points: rows.iter().filter_map(|r| pick(r).map(|v| (r.power_dbm, v))).collect(),
            })
            .collect()
    };
    let mut artifacts = Vec::new();
    let snr = svg_plot("SNR versus launch power", "Launch power per channel (dBm)", "SNR (dB)", &series(|r| r.snr_db));
    write_file(&dir.join("snr_vs_power.svg"), &snr, &mut artifacts)?;
    let air = svg_plot(
        "AIR versus launch power",
        "Launch power per channel (dBm)",
        "AIR (Tbit/s)",
        &series(|r| r.air_tbps),
    );
    write_file(&dir.join("air_vs_power.svg"), &air, &mut artifacts)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts,
    })
}

/// One labelled curve of a line plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line plot with markers, gridlines and a legend entry per series.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (800.0, 520.0);
    let (left, right, top, bottom) = (80.0, 230.0, 50.0, 70.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = all().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let xs = nice_step(x1 - x0, 8);
    let ys = nice_step(y1 - y0, 6);
    let (x0, x1) = ((x0 / xs).floor() * xs, (x1 / xs).ceil() * xs);
    let (y0, y1) = ((y0 / ys).floor() * ys, (y1 / ys).ceil() * ys);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let nx = ((x1 - x0) / xs).round() as usize;
    for i in 0..=nx {
        let x = x0 + i as f64 * xs;
        let gx = px(x);
        let _ = writeln!(
            s,
            r##"<line x1="{gx:.1}" y1="{top}" x2="{gx:.1}" y2="{:.1}" stroke="#e0e0e0"/><text x="{gx:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 18.0,
            fmt_tick(x, xs)
        );
    }
    let ny = ((y1 - y0) / ys).round() as usize;
    for i in 0..=ny {
        let y = y0 + i as f64 * ys;
        let gy = py(y);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{gy:.1}" x2="{:.1}" y2="{gy:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            gy + 4.0,
            fmt_tick(y, ys)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{colour}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = top + 10.0 + i as f64 * 20.0;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" class="legend">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10()).ceil() as usize };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::SweepPower(a) => cmd_sweep_power(a),
        Command::OptimizeSteps(a) => cmd_optimize_steps(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                log::info!("wrote {}", a.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-10:4:2").unwrap().len(), 8);
        assert_eq!(parse_range("0:0:1").unwrap(), vec![0.0]);
        assert_eq!(parse_range("-1:1:0.2").unwrap()[3], -0.4);
        assert_eq!(parse_range("0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.9]);
        for bad in ["1:2", "a:1:1", "0:1:0", "2:1:1", "0:1:-1"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn compensation_list() {
        let cfg = SystemConfig::desk();
        assert_eq!(parse_compensation("edc", &cfg, 5).unwrap(), Compensation::Edc);
        let full = parse_compensation("full", &cfg, 5).unwrap();
        assert_eq!(full.dbp().unwrap().n_selected_channels(cfg.wdm.channel_spacing), 3);
        assert_eq!(full.dbp().unwrap().steps_per_span, 5);
        assert_eq!(parse_compensation("dbp1", &cfg, 5).unwrap().label(cfg.wdm.channel_spacing), "DBP-1ch");
        assert!(parse_compensation("dbp2", &cfg, 5).is_err());
        assert!(parse_compensation("dbp5", &cfg, 5).is_err());
        assert!(parse_compensation("volterra", &cfg, 5).is_err());
    }

    #[test]
    fn svg_has_legend_per_series() {
        let series = vec![
            Series {
                name: "DP-QPSK EDC".into(),
                points: vec![(-2.0, 10.0), (0.0, 12.0)],
            },
            Series {
                name: "DP-16QAM <EDC>".into(),
                points: vec![(-2.0, 9.0), (0.0, 11.5)],
            },
        ];
        let svg = svg_plot("t", "x", "y", &series);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert!(svg.contains("DP-16QAM &lt;EDC&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("DP-16QAM DBP 96.1 GHz x25"), "dp_16qam_dbp_96_1_ghz_x25");
    }
}
