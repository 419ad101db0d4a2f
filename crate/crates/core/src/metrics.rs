//! Data-aided SNR estimation, mutual information of square QAM over AWGN,
//! and achievable information rates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{linear_to_db, WdmSpec};
use crate::modem::Constellation;

/// Reported SNR never exceeds this value.
pub const SNR_CAP_DB: f64 = 60.0;
pub const MIN_SNR_SYMBOLS: usize = 1000;
pub const DEFAULT_GH_ORDER: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("transmitted and received lengths differ ({tx} vs {rx})")]
    LengthMismatch { tx: usize, rx: usize },
    #[error("need at least {MIN_SNR_SYMBOLS} symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("transmitted symbols have zero power")]
    ZeroTxPower,
}

/// SNR of one polarisation after removing the least-squares complex gain, linear.
pub fn snr_linear(tx: &[Complex64], rx: &[Complex64]) -> Result<f64, MetricsError> {
    if tx.len() != rx.len() {
        return Err(MetricsError::LengthMismatch {
            tx: tx.len(),
            rx: rx.len(),
        });
    }
    if tx.len() < MIN_SNR_SYMBOLS {
        return Err(MetricsError::TooFewSymbols(tx.len()));
    }
    let e_tx: f64 = tx.iter().map(|t| t.norm_sqr()).sum();
    if !(e_tx > 0.0) {
        return Err(MetricsError::ZeroTxPower);
    }
    let corr: Complex64 = tx.iter().zip(rx).map(|(t, r)| t.conj() * r).sum();
    let h = corr / e_tx;
    let e_err: f64 = tx.iter().zip(rx).map(|(t, r)| (r - h * t).norm_sqr()).sum();
    let cap = 10f64.powf(SNR_CAP_DB / 10.0);
    let signal = h.norm_sqr() * e_tx;
    if e_err <= signal / cap {
        Ok(cap)
    } else {
        Ok(signal / e_err)
    }
}

/// Dual-polarisation SNR in dB: per-polarisation linear SNRs averaged, capped at [`SNR_CAP_DB`].
pub fn estimate_snr(tx: [&[Complex64]; 2], rx: [&[Complex64]; 2]) -> Result<f64, MetricsError> {
    let a = snr_linear(tx[0], rx[0])?;
    let b = snr_linear(tx[1], rx[1])?;
    Ok(linear_to_db((a + b) / 2.0).min(SNR_CAP_DB))
}

/// Gauss-Hermite nodes and weights for the weight function exp(-x^2).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Mutual information in bits per 2D symbol of a unit-energy constellation
/// over complex AWGN at `snr_db`, by Gauss-Hermite quadrature of the given order per axis.
pub fn mi_awgn_with_order(snr_db: f64, constellation: &Constellation, order: usize) -> f64 {
    let m = constellation.order();
    let log2m = (m as f64).log2();
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let sigma = sigma2.sqrt();
    let (nodes, weights) = gauss_hermite(order);
    let pts = constellation.points();
    let mut acc = 0.0;
    let mut exps = vec![0.0; m];
    for xi in pts {
        for (ta, wa) in nodes.iter().zip(&weights) {
            for (tb, wb) in nodes.iter().zip(&weights) {
                let z = Complex64::new(sigma * ta, sigma * tb);
                let z2 = z.norm_sqr();
                let mut hi = f64::NEG_INFINITY;
                for (e, xj) in exps.iter_mut().zip(pts) {
                    *e = -((xi - xj + z).norm_sqr() - z2) / sigma2;
                    hi = hi.max(*e);
                }
                let lse = hi + exps.iter().map(|e| (e - hi).exp()).sum::<f64>().ln();
                acc += wa * wb * lse;
            }
        }
    }
    let expectation = acc / (std::f64::consts::PI * m as f64) / std::f64::consts::LN_2;
    (log2m - expectation).clamp(0.0, log2m)
}

pub fn mi_awgn(snr_db: f64, constellation: &Constellation) -> f64 {
    mi_awgn_with_order(snr_db, constellation, DEFAULT_GH_ORDER)
}

/// (per-channel, total) achievable information rate in bit/s, two polarisations per channel.
pub fn air(mi: f64, wdm: &WdmSpec) -> (f64, f64) {
    let per_channel = 2.0 * wdm.symbol_rate * mi;
    (per_channel, wdm.n_channels as f64 * per_channel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub snr_db: f64,
    pub mi_bits_per_2d_symbol: f64,
    /// bit/s
    pub air_per_channel: f64,
    /// bit/s
    pub air_total: f64,
    pub n_symbols_used: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "snr_db,mi_bits_per_2d_symbol,air_per_channel_bps,air_total_bps,n_symbols_used";

    pub fn from_snr(snr_db: f64, constellation: &Constellation, wdm: &WdmSpec, n_symbols_used: usize) -> Self {
        let mi = mi_awgn(snr_db, constellation);
        let (air_per_channel, air_total) = air(mi, wdm);
        MetricsReport {
            snr_db,
            mi_bits_per_2d_symbol: mi,
            air_per_channel,
            air_total,
            n_symbols_used,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.snr_db, self.mi_bits_per_2d_symbol, self.air_per_channel, self.air_total, self.n_symbols_used
        )
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModulationFormat, SystemConfig};
    use crate::modem::{constellation_for, generate_frame};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gh_moments() {
        for n in [1, 2, 5, 10, 20, 40] {
            let (x, w) = gauss_hermite(n);
            let pi = std::f64::consts::PI;
            assert!((w.iter().sum::<f64>() - pi.sqrt()).abs() < 1e-12, "n={n}");
            if n >= 2 {
                let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
            }
            if n >= 3 {
                let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
                assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-11);
            }
        }
    }

    fn frame() -> (Vec<Complex64>, Vec<Complex64>) {
        let c = constellation_for(ModulationFormat::Qam16);
        let f = generate_frame(0, &c, 1 << 16, 21);
        (f.x_pol, f.y_pol)
    }

    #[test]
    fn snr_cap_and_scale_invariance() {
        let (x, y) = frame();
        assert_eq!(estimate_snr([&x, &y], [&x, &y]).unwrap(), SNR_CAP_DB);
        let x2: Vec<_> = x.iter().map(|v| v * 2.0).collect();
        let y2: Vec<_> = y.iter().map(|v| v * Complex64::new(0.0, 2.0)).collect();
        assert_eq!(estimate_snr([&x, &y], [&x2, &y2]).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn snr_with_constructed_noise() {
        let (x, y) = frame();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = (0.1f64 / 2.0).sqrt();
        let mut noisy = |v: &[Complex64]| {
            v.iter()
                .map(|t| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    t + Complex64::new(a * s, b * s)
                })
                .collect::<Vec<_>>()
        };
        let rx = noisy(&x);
        let ry = noisy(&y);
        let snr = estimate_snr([&x, &y], [&rx, &ry]).unwrap();
        assert!((snr - 10.0).abs() < 0.1, "{snr}");
    }

    #[test]
    fn snr_errors() {
        let (x, _) = frame();
        assert_eq!(
            snr_linear(&x[..10], &x[..10]),
            Err(MetricsError::TooFewSymbols(10))
        );
        assert!(matches!(
            snr_linear(&x[..2000], &x[..2001]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        let z = vec![Complex64::new(0.0, 0.0); 2000];
        assert_eq!(snr_linear(&z, &x[..2000]), Err(MetricsError::ZeroTxPower));
    }

    #[test]
    fn mi_limits() {
        let qpsk = constellation_for(ModulationFormat::Qpsk);
        assert!((mi_awgn(60.0, &qpsk) - 2.0).abs() < 1e-3);
        for fmt in ModulationFormat::ALL {
            assert!(mi_awgn(-40.0, &constellation_for(fmt)) < 0.01);
        }
    }

    #[test]
    fn mi_monotone_and_bounded() {
        for fmt in ModulationFormat::ALL {
            let c = constellation_for(fmt);
            let log2m = (c.order() as f64).log2();
            let mut prev = -1.0;
            for i in 0..=40 {
                let snr = -10.0 + i as f64;
                let mi = mi_awgn(snr, &c);
                let shannon = (1.0 + 10f64.powf(snr / 10.0)).log2();
                assert!(mi <= shannon + 1e-9, "{fmt} {snr}");
                if prev < log2m - 1e-6 {
                    assert!(mi > prev, "{fmt} at {snr} dB: {mi} <= {prev}");
                }
                prev = mi;
            }
        }
    }

    #[test]
    fn air_examples() {
        let mut wdm = SystemConfig::paper().wdm;
        let (_, total) = air(8.0, &wdm);
        assert!((total - 4.608e12).abs() < 1.0);
        assert_eq!(air(0.0, &wdm), (0.0, 0.0));
        // 2.86 Tbit/s over 9 x 32 GBd x 2 polarisations
        let mi: f64 = 2.86e12 / (2.0 * 9.0 * 32e9);
        assert!((mi - 4.965).abs() < 0.01);
        wdm.n_channels = 3;
        let (per, total) = air(2.0, &wdm);
        assert_eq!(total, 3.0 * per);
    }

    #[test]
    fn report_serialisation() {
        let c = constellation_for(ModulationFormat::Qam64);
        let r = MetricsReport::from_snr(15.0, &c, &SystemConfig::desk().wdm, 8192);
        assert_eq!(r.csv_row().split(',').count(), MetricsReport::CSV_HEADER.split(',').count());
        let back: MetricsReport = toml::from_str(&r.to_toml_string()).unwrap();
        assert_eq!(back, r);
        assert!(r.mi_bits_per_2d_symbol <= 6.0);
    }
}
