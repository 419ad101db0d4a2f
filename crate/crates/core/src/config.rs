//! System configuration: physical constants, WDM/fibre/link parameters,
//! compensation settings and the two scale presets.
//!
//! Configuration documents are TOML. Every key is listed in [`KNOWN_KEYS`];
//! anything else is rejected. See `configs/desk.toml` for the canonical layout.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that overrides `master_seed` after loading.
pub const SEED_ENV_VAR: &str = "WDM_NLC_SEED";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Speed of light in vacuum, m/s.
    pub c: f64,
    /// Planck constant, J s.
    pub h: f64,
}

pub const PHYSICAL: PhysicalConstants = PhysicalConstants {
    c: 2.998e8,
    h: 6.626e-34,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("bad override '{0}': expected key=value")]
    BadOverride(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationFormat {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
    #[serde(rename = "256QAM")]
    Qam256,
}

impl ModulationFormat {
    pub const ALL: [ModulationFormat; 4] = [
        ModulationFormat::Qpsk,
        ModulationFormat::Qam16,
        ModulationFormat::Qam64,
        ModulationFormat::Qam256,
    ];

    pub fn order(self) -> usize {
        match self {
            ModulationFormat::Qpsk => 4,
            ModulationFormat::Qam16 => 16,
            ModulationFormat::Qam64 => 64,
            ModulationFormat::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }

    pub fn from_order(m: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.order() == m)
    }

    /// Short name used in config files and CSV output (`QPSK`, `16QAM`, ...).
    pub fn name(self) -> &'static str {
        match self {
            ModulationFormat::Qpsk => "QPSK",
            ModulationFormat::Qam16 => "16QAM",
            ModulationFormat::Qam64 => "64QAM",
            ModulationFormat::Qam256 => "256QAM",
        }
    }
}

impl fmt::Display for ModulationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DP-{}", self.name())
    }
}

impl FromStr for ModulationFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("DP-").unwrap_or(&key);
        match key {
            "QPSK" | "4QAM" => Ok(ModulationFormat::Qpsk),
            "16QAM" => Ok(ModulationFormat::Qam16),
            "64QAM" => Ok(ModulationFormat::Qam64),
            "256QAM" => Ok(ModulationFormat::Qam256),
            _ => Err(format!(
                "unknown format '{s}' (supported: QPSK, 16QAM, 64QAM, 256QAM)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WdmSpec {
    pub n_channels: usize,
    /// Hz
    pub symbol_rate: f64,
    /// Hz
    pub channel_spacing: f64,
    pub rolloff: f64,
    /// m
    pub centre_wavelength: f64,
    pub format: ModulationFormat,
    /// Symbols per channel per polarisation.
    pub n_symbols: usize,
    /// Samples per symbol on the aggregate simulation grid.
    pub sim_oversampling: usize,
}

impl WdmSpec {
    pub fn sample_rate(&self) -> f64 {
        self.sim_oversampling as f64 * self.symbol_rate
    }

    pub fn n_samples(&self) -> usize {
        self.n_symbols * self.sim_oversampling
    }

    /// Optical carrier frequency at the comb centre, Hz.
    pub fn carrier_frequency(&self) -> f64 {
        PHYSICAL.c / self.centre_wavelength
    }

    /// Total occupied optical bandwidth of the comb, Hz.
    pub fn occupied_bandwidth(&self) -> f64 {
        (self.n_channels as f64 - 1.0) * self.channel_spacing
            + self.symbol_rate * (1.0 + self.rolloff)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_channels == 0 || self.n_channels % 2 == 0 {
            return Err(invalid(
                "n_channels",
                format!("must be odd and >= 1, got {}", self.n_channels),
            ));
        }
        if !(self.symbol_rate > 0.0) {
            return Err(invalid("symbol_rate", "must be positive"));
        }
        if !(self.rolloff > 0.0 && self.rolloff < 1.0) {
            return Err(invalid(
                "rolloff",
                format!("must lie in (0, 1), got {}", self.rolloff),
            ));
        }
        if !(self.channel_spacing >= self.symbol_rate) {
            return Err(invalid(
                "channel_spacing",
                format!(
                    "{} Hz is below the symbol rate {} Hz",
                    self.channel_spacing, self.symbol_rate
                ),
            ));
        }
        if self.n_channels > 1 && self.channel_spacing < self.symbol_rate * (1.0 + self.rolloff) {
            log::warn!(
                "channel spacing {:.4} GHz is below symbol_rate*(1+rolloff); neighbouring spectra overlap",
                self.channel_spacing / 1e9
            );
        }
        if !(self.centre_wavelength > 0.0) {
            return Err(invalid("centre_wavelength", "must be positive"));
        }
        if self.n_symbols < 2 || !self.n_symbols.is_power_of_two() {
            return Err(invalid(
                "n_symbols",
                format!("must be a power of two >= 2, got {}", self.n_symbols),
            ));
        }
        if self.sim_oversampling < 2 {
            return Err(invalid("sim_oversampling", "must be at least 2"));
        }
        if self.occupied_bandwidth() >= self.sample_rate() {
            return Err(invalid(
                "sim_oversampling",
                format!(
                    "grid of {:.1} GHz cannot hold {:.1} GHz of signal",
                    self.sample_rate() / 1e9,
                    self.occupied_bandwidth() / 1e9
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Logarithmic,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub alpha_db_per_km: f64,
    /// ps/nm/km
    pub dispersion_d: f64,
    /// 1/W/km, bare fibre value (no polarisation averaging).
    pub gamma: f64,
    pub manakov_factor: f64,
    /// km
    pub span_length: f64,
    pub steps_per_span: usize,
    pub step_rule: StepRule,
}

impl FiberSpec {
    /// Power attenuation coefficient in Np/km.
    pub fn alpha_np_per_km(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// Group-velocity dispersion in s^2/km at the given wavelength.
    pub fn beta2_s2_per_km(&self, wavelength: f64) -> f64 {
        beta2_from_d(self.dispersion_d, wavelength) * 1e-24
    }

    /// Nonlinear coefficient including the Manakov averaging factor.
    pub fn effective_gamma(&self) -> f64 {
        self.manakov_factor * self.gamma
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha_db_per_km > 0.0) {
            return Err(invalid("alpha_db_per_km", "must be positive"));
        }
        if !self.dispersion_d.is_finite() {
            return Err(invalid("dispersion_d", "must be finite"));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid("gamma", "must be non-negative"));
        }
        if !(self.manakov_factor > 0.0 && self.manakov_factor <= 1.0) {
            return Err(invalid("manakov_factor", "must lie in (0, 1]"));
        }
        if !(self.span_length >= 0.0) {
            return Err(invalid("span_length", "must be non-negative"));
        }
        if self.steps_per_span == 0 {
            return Err(invalid("steps_per_span", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub n_spans: usize,
    pub amp_noise_figure_db: f64,
    /// Amplifiers apply gain only, without ASE.
    #[serde(default)]
    pub noiseless: bool,
    pub fiber: FiberSpec,
}

impl LinkSpec {
    pub fn total_length_km(&self) -> f64 {
        self.n_spans as f64 * self.fiber.span_length
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_spans == 0 {
            return Err(invalid("n_spans", "must be at least 1"));
        }
        if !(self.amp_noise_figure_db > 0.0) {
            return Err(invalid("amp_noise_figure_db", "must be positive"));
        }
        if self.amp_noise_figure_db < 3.0 {
            log::warn!(
                "noise figure {} dB is below the 3 dB quantum limit",
                self.amp_noise_figure_db
            );
        }
        self.fiber.validate()
    }
}

/// Spectral shape used to select the back-propagated bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    RrcAggregate,
    IdealBrickwall,
}

/// How the band-selected field is rescaled before back-propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbpRenorm {
    /// Total in-band power set to (selected channels) x launch power.
    TotalInBand,
    /// Each selected channel slot rescaled to the launch power individually.
    PerChannel,
}

fn default_filter_shape() -> FilterShape {
    FilterShape::RrcAggregate
}

fn default_renorm() -> DbpRenorm {
    DbpRenorm::TotalInBand
}

/// Back-propagation settings. The launch power is taken from the enclosing
/// [`SystemConfig`] at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbpSpec {
    /// Back-propagated bandwidth, Hz.
    pub bandwidth: f64,
    pub steps_per_span: usize,
    #[serde(default = "default_filter_shape")]
    pub filter_shape: FilterShape,
    #[serde(default = "default_renorm")]
    pub renorm: DbpRenorm,
}

impl DbpSpec {
    /// Full-field or k-channel DBP with the default filter and renormalisation.
    pub fn channels(k: usize, spacing: f64, steps_per_span: usize) -> Self {
        DbpSpec {
            bandwidth: k as f64 * spacing,
            steps_per_span,
            filter_shape: FilterShape::RrcAggregate,
            renorm: DbpRenorm::TotalInBand,
        }
    }

    /// Number of whole channels inside the back-propagated band.
    pub fn n_selected_channels(&self, spacing: f64) -> usize {
        (self.bandwidth / spacing).round() as usize
    }

    pub fn validate(&self, wdm: &WdmSpec) -> Result<(), ConfigError> {
        if self.steps_per_span == 0 {
            return Err(invalid("compensation.steps_per_span", "must be at least 1"));
        }
        let k = self.bandwidth / wdm.channel_spacing;
        let ki = k.round() as usize;
        if (k - ki as f64).abs() > 1e-6 || ki % 2 == 0 || ki > wdm.n_channels {
            return Err(invalid(
                "compensation.bandwidth",
                format!(
                    "{} Hz must be an odd multiple k <= {} of the channel spacing",
                    self.bandwidth, wdm.n_channels
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Compensation {
    /// Linear dispersion compensation only.
    Edc,
    Dbp(DbpSpec),
}

impl Compensation {
    pub fn dbp(&self) -> Option<&DbpSpec> {
        match self {
            Compensation::Edc => None,
            Compensation::Dbp(spec) => Some(spec),
        }
    }

    /// Short label, e.g. `EDC` or `DBP-3ch`.
    pub fn label(&self, spacing: f64) -> String {
        match self {
            Compensation::Edc => "EDC".to_string(),
            Compensation::Dbp(s) => format!("DBP-{}ch", s.n_selected_channels(spacing)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePreset {
    Paper,
    Desk,
}

impl FromStr for ScalePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(ScalePreset::Paper),
            "desk" => Ok(ScalePreset::Desk),
            _ => Err(format!("unknown preset '{s}' (expected paper or desk)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub scale_preset: ScalePreset,
    /// Per-channel launch power, dBm.
    pub launch_power_dbm: f64,
    pub master_seed: u64,
    pub wdm: WdmSpec,
    pub link: LinkSpec,
    pub compensation: Compensation,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

/// Controls for the steps-per-span search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    /// Candidate DBP step counts, ascending. The forward step count is always added.
    pub ladder: Vec<usize>,
    /// Allowed shortfall of the peak SNR, dB.
    pub snr_tolerance_db: f64,
    /// Allowed shortfall of the peak per-channel AIR as a fraction of 2 Rs log2(M).
    pub air_tolerance_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            ladder: vec![1, 2, 5, 10, 25, 50, 75, 100, 150, 200, 250, 500],
            snr_tolerance_db: 0.1,
            air_tolerance_fraction: 0.005,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ladder.is_empty() || self.ladder.contains(&0) {
            return Err(invalid("experiment.ladder", "must list step counts >= 1"));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("experiment.ladder", "must be strictly ascending"));
        }
        if !(self.snr_tolerance_db >= 0.0) {
            return Err(invalid("experiment.snr_tolerance_db", "must be >= 0"));
        }
        if !(self.air_tolerance_fraction >= 0.0 && self.air_tolerance_fraction < 1.0) {
            return Err(invalid("experiment.air_tolerance_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Every dotted key a configuration document may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "scale_preset",
    "launch_power_dbm",
    "master_seed",
    "wdm.n_channels",
    "wdm.symbol_rate",
    "wdm.channel_spacing",
    "wdm.rolloff",
    "wdm.centre_wavelength",
    "wdm.format",
    "wdm.n_symbols",
    "wdm.sim_oversampling",
    "link.n_spans",
    "link.amp_noise_figure_db",
    "link.noiseless",
    "link.fiber.alpha_db_per_km",
    "link.fiber.dispersion_d",
    "link.fiber.gamma",
    "link.fiber.manakov_factor",
    "link.fiber.span_length",
    "link.fiber.steps_per_span",
    "link.fiber.step_rule",
    "compensation.kind",
    "compensation.bandwidth",
    "compensation.steps_per_span",
    "compensation.filter_shape",
    "compensation.renorm",
    "experiment.ladder",
    "experiment.snr_tolerance_db",
    "experiment.air_tolerance_fraction",
];

/// 8201 x 3.90625 MHz, just above 32 GBd x (1 + 0.001).
pub const DESK_CHANNEL_SPACING: f64 = 32.035_156_25e9;

const SECTIONS: &[&str] = &["wdm", "link", "link.fiber", "compensation", "experiment"];

impl SystemConfig {
    /// Table I system: 9 x 32 GBd, 25 x 80 km SSMF, 800 steps per span, 2^18 symbols.
    pub fn paper() -> Self {
        let n_channels = 9;
        SystemConfig {
            scale_preset: ScalePreset::Paper,
            launch_power_dbm: 0.0,
            master_seed: 1,
            wdm: WdmSpec {
                n_channels,
                symbol_rate: 32e9,
                channel_spacing: 32e9,
                rolloff: 0.001,
                centre_wavelength: 1550e-9,
                format: ModulationFormat::Qam256,
                n_symbols: 1 << 18,
                sim_oversampling: 2 * n_channels,
            },
            link: LinkSpec {
                n_spans: 25,
                amp_noise_figure_db: 4.5,
                noiseless: false,
                fiber: FiberSpec {
                    alpha_db_per_km: 0.2,
                    dispersion_d: 17.0,
                    gamma: 1.2,
                    manakov_factor: 8.0 / 9.0,
                    span_length: 80.0,
                    steps_per_span: 800,
                    step_rule: StepRule::Logarithmic,
                },
            },
            compensation: Compensation::Edc,
            experiment: ExperimentSpec::default(),
        }
    }

    /// Reduced system for routine runs: 3 channels, 10 spans, 200 steps per span, 2^13 symbols.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        cfg.scale_preset = ScalePreset::Desk;
        cfg.wdm.n_channels = 3;
        // smallest multiple of the 2^13-symbol DFT bin that keeps adjacent
        // roll-off bands apart
        cfg.wdm.channel_spacing = DESK_CHANNEL_SPACING;
        cfg.wdm.sim_oversampling = 6;
        cfg.wdm.n_symbols = 1 << 13;
        cfg.link.n_spans = 10;
        cfg.link.fiber.steps_per_span = 200;
        cfg
    }

    pub fn preset(preset: ScalePreset) -> Self {
        match preset {
            ScalePreset::Paper => Self::paper(),
            ScalePreset::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.launch_power_dbm.is_finite() {
            return Err(invalid("launch_power_dbm", "must be finite"));
        }
        self.wdm.validate()?;
        self.link.validate()?;
        if let Compensation::Dbp(spec) = &self.compensation {
            spec.validate(&self.wdm)?;
        }
        self.experiment.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    /// Applies a dotted `key=value` override. The value is parsed as a TOML
    /// scalar, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKeys(vec![key.to_string()]));
        }
        let value = parse_scalar(raw.trim());
        let mut table = toml::Table::try_from(&*self).expect("config serialises to a table");
        set_dotted(&mut table, key, value);
        let updated: SystemConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Schema(e.message().to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Replaces `master_seed` with the value of [`SEED_ENV_VAR`] when set.
    pub fn apply_env_overrides(&mut self) -> Result<(), ConfigError> {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            self.master_seed = raw
                .trim()
                .parse()
                .map_err(|_| invalid("master_seed", format!("{SEED_ENV_VAR}='{raw}' is not an integer")))?;
        }
        Ok(())
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .expect("section is a table");
    }
    cur.insert(last.to_string(), value);
}

fn collect_keys(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(inner) if SECTIONS.contains(&path.as_str()) => {
                collect_keys(&path, inner, out)
            }
            _ => out.push(path),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let mut keys = Vec::new();
    collect_keys("", &table, &mut keys);
    let unknown: Vec<String> = keys
        .into_iter()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .collect();
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let cfg: SystemConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Schema(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &std::path::Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config(&text)
}

/// beta2 = -D lambda^2 / (2 pi c), returned in ps^2/km for D in ps/nm/km.
pub fn beta2_from_d(d_ps_nm_km: f64, wavelength: f64) -> f64 {
    // ps/nm/km -> s/m/km is a factor 1e-3; s^2/km -> ps^2/km is 1e24.
    -d_ps_nm_km * 1e-3 * wavelength * wavelength / (2.0 * PI * PHYSICAL.c) * 1e24
}

pub fn span_gain_db(fiber: &FiberSpec) -> f64 {
    fiber.alpha_db_per_km * fiber.span_length
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
