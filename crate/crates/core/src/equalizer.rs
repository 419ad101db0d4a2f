//! Receiver-side compensation: electronic dispersion compensation (EDC) and
//! multi-channel digital back-propagation (DBP) over a selectable bandwidth.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{step_plan, Direction, FiberModel, Propagator};
use crate::config::{db_to_linear, dbm_to_watts, span_gain_db, DbpRenorm, LinkSpec};
use crate::sigproc::{bandwidth_select, frequencies, ChannelPlan, SampledField, SigprocError, Spectral};

pub use crate::config::DbpSpec;

#[derive(Debug, Error)]
pub enum EqualizerError {
    #[error("back-propagated bandwidth {bandwidth} Hz exceeds the {sample_rate} Hz grid")]
    BandwidthExceedsGrid { bandwidth: f64, sample_rate: f64 },
    #[error("nothing to back-propagate: selected band has zero power")]
    SilentBand,
    #[error(transparent)]
    Sigproc(#[from] SigprocError),
}

/// Inverse of the accumulated dispersion of the whole link, both polarisations.
pub fn edc(field: &SampledField, link: &LinkSpec, wavelength: f64) -> SampledField {
    let mut model = FiberModel::new(&link.fiber, wavelength);
    model.alpha = 0.0;
    model.gamma = 0.0;
    let mut out = field.clone();
    let total = link.total_length_km();
    if total > 0.0 {
        Propagator::new(model, field.len(), field.sample_rate).linear(&mut out, -total);
    }
    out
}

/// What DBP needs to know about the transmitter besides the link itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbpContext {
    pub plan: ChannelPlan,
    pub symbol_rate: f64,
    pub wavelength: f64,
    /// Known per-channel launch power, dBm.
    pub launch_power_dbm: f64,
}

/// Samples per symbol used inside DBP: two per symbol per back-propagated
/// channel, never more than the input grid.
fn dbp_oversampling(spec: &DbpSpec, ctx: &DbpContext, grid_sps: usize) -> usize {
    let k = spec.n_selected_channels(ctx.plan.spacing).max(1);
    let mut sps = 2 * k;
    // the selection filter tail must stay inside the reduced grid
    while (sps as f64) * ctx.symbol_rate <= spec.bandwidth * 1.002 {
        sps += 1;
    }
    sps.min(grid_sps)
}

/// Truncates (or zero-pads) the spectrum to `n` bins. Amplitudes are rescaled
/// so that time-domain sample values are preserved.
fn resample(field: &SampledField, n: usize, sample_rate: f64) -> SampledField {
    let n_in = field.len();
    if n == n_in {
        return field.clone();
    }
    let mut s_in = Spectral::new(n_in);
    let mut s_out = Spectral::new(n);
    let gain = n as f64 / n_in as f64;
    let keep = n.min(n_in) / 2;
    let mut convert = |pol: &[Complex64]| {
        let mut spec = pol.to_vec();
        s_in.forward(&mut spec);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[..keep].copy_from_slice(&spec[..keep]);
        out[n - keep..].copy_from_slice(&spec[n_in - keep..]);
        out.iter_mut().for_each(|v| *v *= gain);
        s_out.inverse(&mut out);
        out
    };
    let x = convert(&field.x_pol);
    let y = convert(&field.y_pol);
    SampledField {
        x_pol: x,
        y_pol: y,
        sample_rate,
        centre_frequency_offset: field.centre_frequency_offset,
        occupied_bandwidth: field.occupied_bandwidth.min(sample_rate),
    }
}

/// Scales each selected channel slot so its power equals `target_w`.
fn renormalise_per_channel(field: &mut SampledField, ctx: &DbpContext, k: usize, target_w: f64) {
    let n = field.len();
    let mut spectral = Spectral::new(n);
    let freqs = frequencies(n, field.sample_rate);
    let spacing = ctx.plan.spacing;
    let half = (k / 2) as i64;
    let slot_of = |f: f64| -> Option<usize> {
        let s = (f / spacing).round() as i64;
        (s.abs() <= half).then_some((s + half) as usize)
    };
    spectral.forward(&mut field.x_pol);
    spectral.forward(&mut field.y_pol);
    let mut slot_energy = vec![0.0; k];
    for (i, f) in freqs.iter().enumerate() {
        if let Some(s) = slot_of(*f) {
            slot_energy[s] += field.x_pol[i].norm_sqr() + field.y_pol[i].norm_sqr();
        }
    }
    // Parseval: mean time-domain power = spectral energy / n^2
    let scales: Vec<f64> = slot_energy
        .iter()
        .map(|e| {
            let p = e / (n as f64 * n as f64);
            if p > 0.0 {
                (target_w / p).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for (i, f) in freqs.iter().enumerate() {
        if let Some(s) = slot_of(*f) {
            field.x_pol[i] *= scales[s];
            field.y_pol[i] *= scales[s];
        }
    }
    spectral.inverse(&mut field.x_pol);
    spectral.inverse(&mut field.y_pol);
}

/// Multi-channel digital back-propagation.
///
/// The band is selected, rescaled to the known launch power, then every span
/// is inverted in reverse order: amplifier gain removed, fibre back-propagated
/// over the mirrored step plan with `spec.steps_per_span` steps. The output has
/// the power of the band-selected input and lives on the input grid.
pub fn dbp(
    field: &SampledField,
    spec: &DbpSpec,
    link: &LinkSpec,
    ctx: &DbpContext,
) -> Result<SampledField, EqualizerError> {
    if spec.bandwidth > field.sample_rate {
        return Err(EqualizerError::BandwidthExceedsGrid {
            bandwidth: spec.bandwidth,
            sample_rate: field.sample_rate,
        });
    }
    let selected = bandwidth_select(field, spec.bandwidth, spec.filter_shape)?;
    let selected_power = selected.power();
    if !(selected_power > 0.0) {
        return Err(EqualizerError::SilentBand);
    }

    let grid_sps = (field.sample_rate / ctx.symbol_rate).round() as usize;
    let n_symbols = field.len() / grid_sps;
    let sps = dbp_oversampling(spec, ctx, grid_sps);
    let rate = sps as f64 * ctx.symbol_rate;
    let mut work = resample(&selected, n_symbols * sps, rate);

    let k = spec.n_selected_channels(ctx.plan.spacing).max(1);
    let per_channel = dbm_to_watts(ctx.launch_power_dbm);
    match spec.renorm {
        DbpRenorm::TotalInBand => {
            let p = work.power();
            work.scale((k as f64 * per_channel / p).sqrt());
        }
        DbpRenorm::PerChannel => renormalise_per_channel(&mut work, ctx, k, per_channel),
    }

    let model = FiberModel::new(&link.fiber, ctx.wavelength);
    let plan = step_plan(&link.fiber, spec.steps_per_span);
    let inv_gain = db_to_linear(span_gain_db(&link.fiber)).sqrt().recip();
    let mut propagator = Propagator::new(model, work.len(), work.sample_rate);
    for _ in 0..link.n_spans {
        work.scale(inv_gain);
        if link.fiber.span_length > 0.0 {
            propagator.run_plan(&mut work, &plan, Direction::Backward);
        }
    }

    let p = work.power();
    if p > 0.0 {
        work.scale((selected_power / p).sqrt());
    }
    let mut out = resample(&work, field.len(), field.sample_rate);
    out.occupied_bandwidth = selected.occupied_bandwidth;
    Ok(out)
}
