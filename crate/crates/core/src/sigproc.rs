//! Sampled dual-polarisation fields and the linear DSP applied to them.
//!
//! All filtering is done on the whole frame in the frequency domain, so every
//! filter is a circular convolution and frames behave as periodic signals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::config::{dbm_to_watts, FilterShape};
use crate::modem::{read_complex64, write_complex64, SymbolFrame};

#[derive(Debug, Error)]
pub enum SigprocError {
    #[error("sample rate {sample_rate} Hz is below the {required} Hz needed by the pulse shape")]
    Undersampled { sample_rate: f64, required: f64 },
    #[error("sample rate {sample_rate} Hz is not an integer multiple of the symbol rate {symbol_rate} Hz")]
    FractionalOversampling { sample_rate: f64, symbol_rate: f64 },
    #[error("shift to {target} Hz would alias: band edge passes the grid Nyquist frequency {nyquist} Hz")]
    Aliasing { target: f64, nyquist: f64 },
    #[error("fields do not share one sampling grid")]
    GridMismatch,
    #[error("multiplex needs an odd, non-zero number of channels, got {0}")]
    EvenChannelCount(usize),
    #[error("field has zero power")]
    ZeroPower,
    #[error("bandwidth {bandwidth} Hz exceeds the grid rate {sample_rate} Hz")]
    BandwidthTooWide { bandwidth: f64, sample_rate: f64 },
    #[error("channel index {index} out of range for {n_channels} channels")]
    ChannelOutOfRange { index: usize, n_channels: usize },
    #[error("field file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("field file {path}: {detail}")]
    BadDump { path: String, detail: String },
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<usize, PlanPair>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, map) = &mut *guard;
    if let Some(p) = map.get(&n) {
        return p.clone();
    }
    let pair = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    map.insert(n, pair.clone());
    pair
}

/// Forward/inverse FFT of one length with reusable scratch. The inverse is
/// normalised by 1/n.
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let (fwd, inv) = plans(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Spectral {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Frequency of each DFT bin in Hz, in FFT order (DC first, negatives last).
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            if k < n.div_ceil(2) {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub x_pol: Vec<Complex64>,
    pub y_pol: Vec<Complex64>,
    /// Hz
    pub sample_rate: f64,
    /// Centre of the field's content relative to the comb centre, Hz. Baseband
    /// 0 Hz of the sample grid is always the comb centre.
    pub centre_frequency_offset: f64,
    /// Two-sided occupied bandwidth around the field centre, Hz.
    pub occupied_bandwidth: f64,
}

impl SampledField {
    pub fn new(x_pol: Vec<Complex64>, y_pol: Vec<Complex64>, sample_rate: f64) -> Self {
        assert_eq!(x_pol.len(), y_pol.len(), "polarisation lengths differ");
        assert!(sample_rate > 0.0);
        SampledField {
            x_pol,
            y_pol,
            sample_rate,
            centre_frequency_offset: 0.0,
            occupied_bandwidth: sample_rate,
        }
    }

    pub fn zeros(n: usize, sample_rate: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self::new(z.clone(), z, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.x_pol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_pol.is_empty()
    }

    /// Mean total power over both polarisations, W.
    pub fn power(&self) -> f64 {
        energy(&self.x_pol, &self.y_pol) / self.len() as f64
    }

    pub fn energy(&self) -> f64 {
        energy(&self.x_pol, &self.y_pol)
    }

    pub fn scale(&mut self, factor: f64) {
        self.x_pol
            .iter_mut()
            .chain(self.y_pol.iter_mut())
            .for_each(|v| *v *= factor);
    }

    pub fn same_grid(&self, other: &SampledField) -> bool {
        self.len() == other.len() && self.sample_rate == other.sample_rate
    }

    /// Multiplies both polarisation spectra by `transfer(f)` (f in Hz, baseband).
    pub fn apply_transfer<F>(&mut self, spectral: &mut Spectral, transfer: F)
    where
        F: Fn(f64) -> Complex64,
    {
        let h: Vec<Complex64> = frequencies(self.len(), self.sample_rate)
            .into_iter()
            .map(transfer)
            .collect();
        self.apply_response(spectral, &h);
    }

    /// Multiplies both polarisation spectra by a precomputed response in FFT bin order.
    pub fn apply_response(&mut self, spectral: &mut Spectral, h: &[Complex64]) {
        for pol in [&mut self.x_pol, &mut self.y_pol] {
            spectral.forward(pol);
            pol.iter_mut().zip(h).for_each(|(v, g)| *v *= g);
            spectral.inverse(pol);
        }
    }
}

fn energy(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().chain(y).map(|v| v.norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrcSpec {
    /// Symbol period, s.
    pub symbol_period: f64,
    pub rolloff: f64,
}

impl RrcSpec {
    pub fn from_rate(symbol_rate: f64, rolloff: f64) -> Self {
        RrcSpec {
            symbol_period: 1.0 / symbol_rate,
            rolloff,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        (1.0 + self.rolloff) / self.symbol_period
    }
}

/// Root-raised-cosine amplitude response, unity in the passband.
pub fn rrc_response(f: f64, spec: RrcSpec) -> f64 {
    let t = spec.symbol_period;
    let b = spec.rolloff;
    let af = f.abs();
    let lo = (1.0 - b) / (2.0 * t);
    let hi = (1.0 + b) / (2.0 * t);
    if af <= lo {
        1.0
    } else if af > hi {
        0.0
    } else {
        let rc = 0.5 * (1.0 + (PI * t / b * (af - lo)).cos());
        rc.sqrt()
    }
}

fn samples_per_symbol(sample_rate: f64, symbol_period: f64) -> Result<usize, SigprocError> {
    let sps = sample_rate * symbol_period;
    let r = sps.round();
    if r < 1.0 || (sps - r).abs() > 1e-9 * r {
        return Err(SigprocError::FractionalOversampling {
            sample_rate,
            symbol_rate: 1.0 / symbol_period,
        });
    }
    Ok(r as usize)
}

/// Pulse-shapes one channel at baseband. The result has unit mean total power.
pub fn shape_channel(
    frame: &SymbolFrame,
    spec: RrcSpec,
    sample_rate: f64,
) -> Result<SampledField, SigprocError> {
    let required = spec.bandwidth();
    if sample_rate < required {
        return Err(SigprocError::Undersampled {
            sample_rate,
            required,
        });
    }
    let sps = samples_per_symbol(sample_rate, spec.symbol_period)?;
    let n = frame.len() * sps;
    let upsample = |syms: &[Complex64]| {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (k, s) in syms.iter().enumerate() {
            v[k * sps] = *s;
        }
        v
    };
    let mut field = SampledField::new(upsample(&frame.x_pol), upsample(&frame.y_pol), sample_rate);
    let mut spectral = Spectral::new(n);
    field.apply_transfer(&mut spectral, |f| Complex64::new(rrc_response(f, spec), 0.0));
    let p = field.power();
    if p > 0.0 {
        field.scale(p.sqrt().recip());
    }
    field.occupied_bandwidth = required;
    Ok(field)
}

fn mix(samples: &mut [Complex64], delta_f: f64, sample_rate: f64) {
    let w = 2.0 * PI * delta_f / sample_rate;
    for (n, s) in samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, w * n as f64);
    }
}

/// Multiplies the field by exp(i 2 pi delta_f t).
pub fn frequency_shift(field: &SampledField, delta_f: f64) -> Result<SampledField, SigprocError> {
    let nyquist = field.sample_rate / 2.0;
    let target = field.centre_frequency_offset + delta_f;
    if target.abs() + field.occupied_bandwidth / 2.0 > nyquist {
        return Err(SigprocError::Aliasing { target, nyquist });
    }
    let mut out = field.clone();
    if delta_f != 0.0 {
        mix(&mut out.x_pol, delta_f, field.sample_rate);
        mix(&mut out.y_pol, delta_f, field.sample_rate);
    }
    out.centre_frequency_offset = target;
    Ok(out)
}

/// Channel layout of a comb: `n_channels` (odd) slots spaced by `spacing`,
/// the centre slot at offset zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPlan {
    pub n_channels: usize,
    pub spacing: f64,
}

impl ChannelPlan {
    pub fn centre_index(&self) -> usize {
        self.n_channels / 2
    }

    pub fn offset(&self, index: usize) -> Result<f64, SigprocError> {
        if index >= self.n_channels {
            return Err(SigprocError::ChannelOutOfRange {
                index,
                n_channels: self.n_channels,
            });
        }
        Ok((index as f64 - self.centre_index() as f64) * self.spacing)
    }
}

/// Sums baseband channel fields onto the comb grid, channel `i` at offset
/// `(i - (N-1)/2) * spacing`.
pub fn multiplex(fields: &[SampledField], spacing: f64) -> Result<SampledField, SigprocError> {
    let n_ch = fields.len();
    if n_ch == 0 || n_ch % 2 == 0 {
        return Err(SigprocError::EvenChannelCount(n_ch));
    }
    let first = &fields[0];
    if fields.iter().any(|f| !f.same_grid(first)) {
        return Err(SigprocError::GridMismatch);
    }
    let bin = first.sample_rate / first.len() as f64;
    let bins = spacing / bin;
    if n_ch > 1 && (bins - bins.round()).abs() > 1e-6 {
        log::warn!("channel spacing is {bins:.3} DFT bins; frame edges will not wrap cleanly");
    }
    let plan = ChannelPlan {
        n_channels: n_ch,
        spacing,
    };
    let mut out = SampledField::zeros(first.len(), first.sample_rate);
    let mut widest: f64 = 0.0;
    for (i, f) in fields.iter().enumerate() {
        let shifted = frequency_shift(f, plan.offset(i)?)?;
        for (o, s) in out.x_pol.iter_mut().zip(&shifted.x_pol) {
            *o += s;
        }
        for (o, s) in out.y_pol.iter_mut().zip(&shifted.y_pol) {
            *o += s;
        }
        widest = widest.max(f.occupied_bandwidth);
    }
    out.occupied_bandwidth = (n_ch as f64 - 1.0) * spacing + widest;
    Ok(out)
}

/// Scales the field so its total power is `n_channels` times the per-channel power.
pub fn set_launch_power(
    field: &SampledField,
    per_channel_dbm: f64,
    n_channels: usize,
) -> Result<SampledField, SigprocError> {
    let p = field.power();
    if !(p > 0.0) {
        return Err(SigprocError::ZeroPower);
    }
    let target = n_channels as f64 * dbm_to_watts(per_channel_dbm);
    let mut out = field.clone();
    out.scale((target / p).sqrt());
    Ok(out)
}

/// Selection-filter amplitude at baseband frequency `f` for a band of width `bandwidth`.
pub fn selection_response(f: f64, bandwidth: f64, shape: FilterShape) -> f64 {
    match shape {
        FilterShape::RrcAggregate => rrc_response(f, RrcSpec::from_rate(bandwidth, 0.001)),
        FilterShape::IdealBrickwall => {
            if f.abs() <= bandwidth / 2.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Keeps the spectrum within +-bandwidth/2 of the field centre.
pub fn bandwidth_select(
    field: &SampledField,
    bandwidth: f64,
    shape: FilterShape,
) -> Result<SampledField, SigprocError> {
    if bandwidth > field.sample_rate * (1.0 + 1e-12) {
        return Err(SigprocError::BandwidthTooWide {
            bandwidth,
            sample_rate: field.sample_rate,
        });
    }
    let mut out = field.clone();
    let mut spectral = Spectral::new(out.len());
    out.apply_transfer(&mut spectral, |f| {
        Complex64::new(selection_response(f, bandwidth, shape), 0.0)
    });
    out.occupied_bandwidth = out.occupied_bandwidth.min(bandwidth * 1.001);
    Ok(out)
}

/// Received symbols of one channel, both polarisations.
#[derive(Debug, Clone, PartialEq)]
pub struct RxSymbols {
    pub x_pol: Vec<Complex64>,
    pub y_pol: Vec<Complex64>,
}

/// Moves the channel to baseband, applies the RRC matched filter and takes
/// sample 0 of every symbol period.
pub fn matched_filter_downsample(
    field: &SampledField,
    channel_index: usize,
    plan: &ChannelPlan,
    spec: RrcSpec,
) -> Result<RxSymbols, SigprocError> {
    let offset = plan.offset(channel_index)?;
    let sps = samples_per_symbol(field.sample_rate, spec.symbol_period)?;
    let mut bb = field.clone();
    if offset != 0.0 {
        mix(&mut bb.x_pol, -offset, field.sample_rate);
        mix(&mut bb.y_pol, -offset, field.sample_rate);
    }
    let mut spectral = Spectral::new(bb.len());
    bb.apply_transfer(&mut spectral, |f| Complex64::new(rrc_response(f, spec), 0.0));
    let pick = |v: &[Complex64]| v.iter().step_by(sps).copied().collect::<Vec<_>>();
    Ok(RxSymbols {
        x_pol: pick(&bb.x_pol),
        y_pol: pick(&bb.y_pol),
    })
}

/// Periodogram PSD, W/Hz summed over polarisations, as (frequency, psd) in ascending frequency.
pub fn power_spectrum(field: &SampledField) -> Vec<(f64, f64)> {
    let n = field.len();
    let mut spectral = Spectral::new(n);
    let mut x = field.x_pol.clone();
    let mut y = field.y_pol.clone();
    spectral.forward(&mut x);
    spectral.forward(&mut y);
    let norm = 1.0 / (n as f64 * field.sample_rate);
    let freqs = frequencies(n, field.sample_rate);
    let mut rows: Vec<(f64, f64)> = freqs
        .into_iter()
        .zip(x.iter().zip(&y))
        .map(|(f, (a, b))| (f, (a.norm_sqr() + b.norm_sqr()) * norm))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows
}

/// Writes the spectrum as CSV with columns `frequency_Hz,psd_dB` (dB re 1 W/Hz).
pub fn write_spectrum_csv(path: &Path, field: &SampledField) -> Result<(), SigprocError> {
    let io_err = |source| SigprocError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(out, "frequency_Hz,psd_dB").map_err(io_err)?;
    for (f, p) in power_spectrum(field) {
        writeln!(out, "{f},{}", 10.0 * p.max(1e-300).log10()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Dumps a field in the frame-dump layout: x samples then y samples, each as
/// little-endian complex64.
pub fn dump_field(path: &Path, field: &SampledField) -> Result<(), SigprocError> {
    let io_err = |source| SigprocError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    write_complex64(&mut out, &field.x_pol).map_err(io_err)?;
    write_complex64(&mut out, &field.y_pol).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn restore_field(path: &Path, sample_rate: f64) -> Result<SampledField, SigprocError> {
    let bytes = std::fs::read(path).map_err(|source| SigprocError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.is_empty() || bytes.len() % 16 != 0 {
        return Err(SigprocError::BadDump {
            path: path.display().to_string(),
            detail: format!("{} bytes is not two equal complex64 arrays", bytes.len()),
        });
    }
    let mut samples = read_complex64(&bytes);
    let y = samples.split_off(samples.len() / 2);
    Ok(SampledField::new(samples, y, sample_rate))
}
