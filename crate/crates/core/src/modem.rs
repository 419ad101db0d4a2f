//! Square QAM alphabets with per-axis Gray labelling, and seeded symbol frames.
//!
//! Random streams are keyed by [`StreamTag`]; the seed of each stream is
//! `splitmix64(master_seed ^ splitmix64(tag.code()))`, so every stream is
//! reproducible regardless of the order or thread in which it is drawn.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::ModulationFormat;

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("unsupported constellation order {0} (supported: 4, 16, 64, 256)")]
    UnsupportedOrder(usize),
    #[error("frame length {0} is not even")]
    OddLength(usize),
    #[error("frame file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("frame file {path} has {bytes} bytes, not a whole number of {channels} channel frames")]
    BadDumpSize {
        path: String,
        bytes: usize,
        channels: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    X,
    Y,
}

/// Identifies an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Data {
        channel: usize,
        pol: Polarization,
    },
    Ase {
        amplifier: usize,
    },
}

impl StreamTag {
    /// Bits 56..64 carry the role, 8..56 the channel/amplifier index, 0..8 the polarisation.
    pub fn code(self) -> u64 {
        match self {
            StreamTag::Data { channel, pol } => {
                let p = match pol {
                    Polarization::X => 0,
                    Polarization::Y => 1,
                };
                (1u64 << 56) | ((channel as u64) << 8) | p
            }
            StreamTag::Ase { amplifier } => (2u64 << 56) | ((amplifier as u64) << 8),
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master_seed: u64, tag: StreamTag) -> u64 {
    splitmix64(master_seed ^ splitmix64(tag.code()))
}

pub fn stream_rng(master_seed: u64, tag: StreamTag) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, tag))
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_string(&self, index: usize) -> String {
        format!(
            "{:0width$b}",
            self.labels[index],
            width = self.bits_per_symbol() as usize
        )
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    pub fn format(&self) -> ModulationFormat {
        ModulationFormat::from_order(self.order).expect("constructed from a supported order")
    }
}

/// Unit-energy square QAM. Point `i * L + q` sits at in-phase level `i` and
/// quadrature level `q` (levels ascending); its label is
/// `gray(i) << (k/2) | gray(q)`.
pub fn build_constellation(order: usize) -> Result<Constellation, ModemError> {
    if ModulationFormat::from_order(order).is_none() {
        return Err(ModemError::UnsupportedOrder(order));
    }
    let levels = (order as f64).sqrt().round() as usize;
    let half_bits = order.trailing_zeros() / 2;
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();
    let amplitude = |i: usize| (2.0 * i as f64 - (levels as f64 - 1.0)) * scale;
    let mut points = Vec::with_capacity(order);
    let mut labels = Vec::with_capacity(order);
    for i in 0..levels {
        for q in 0..levels {
            points.push(Complex64::new(amplitude(i), amplitude(q)));
            labels.push(((gray(i) << half_bits) | gray(q)) as u32);
        }
    }
    Ok(Constellation {
        order,
        points,
        labels,
    })
}

pub fn constellation_for(format: ModulationFormat) -> Constellation {
    build_constellation(format.order()).expect("every format has a supported order")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub x: u64,
    pub y: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub channel_index: usize,
    pub x_pol: Vec<Complex64>,
    pub y_pol: Vec<Complex64>,
    pub seed_record: SeedRecord,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.x_pol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_pol.is_empty()
    }
}

/// Draws i.i.d. uniform symbols for both polarisations of one channel.
///
/// Panics if `n_symbols` is odd or below 2.
pub fn generate_frame(
    channel_index: usize,
    constellation: &Constellation,
    n_symbols: usize,
    master_seed: u64,
) -> SymbolFrame {
    assert!(
        n_symbols >= 2 && n_symbols % 2 == 0,
        "n_symbols must be even and >= 2"
    );
    let draw = |pol| {
        let tag = StreamTag::Data {
            channel: channel_index,
            pol,
        };
        let mut rng = stream_rng(master_seed, tag);
        let pts = constellation.points();
        let syms = (0..n_symbols)
            .map(|_| pts[rng.gen_range(0..pts.len())])
            .collect::<Vec<_>>();
        (syms, derive_seed(master_seed, tag))
    };
    let (x_pol, sx) = draw(Polarization::X);
    let (y_pol, sy) = draw(Polarization::Y);
    SymbolFrame {
        channel_index,
        x_pol,
        y_pol,
        seed_record: SeedRecord { x: sx, y: sy },
    }
}

/// Delays the y polarisation by half the frame (cyclically).
pub fn decorrelate_polarizations(mut frame: SymbolFrame) -> Result<SymbolFrame, ModemError> {
    let n = frame.y_pol.len();
    if n % 2 != 0 {
        return Err(ModemError::OddLength(n));
    }
    frame.y_pol.rotate_left(n / 2);
    Ok(frame)
}

pub(crate) fn write_complex64<W: Write>(w: &mut W, samples: &[Complex64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn read_complex64(bytes: &[u8]) -> Vec<Complex64> {
    bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect()
}

/// Writes frames as little-endian interleaved complex64 (f32 re, f32 im),
/// channel-major, x polarisation then y.
pub fn dump_frames(path: &Path, frames: &[SymbolFrame]) -> Result<(), ModemError> {
    let io_err = |source| ModemError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for f in frames {
        write_complex64(&mut file, &f.x_pol).map_err(io_err)?;
        write_complex64(&mut file, &f.y_pol).map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

/// Reads back a frame dump. Seed records are not stored and come back as zero.
pub fn load_frames(path: &Path, n_channels: usize) -> Result<Vec<SymbolFrame>, ModemError> {
    let io_err = |source| ModemError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err)?;
    let per_pol = 8 * n_channels.max(1) * 2;
    if n_channels == 0 || bytes.len() % per_pol != 0 {
        return Err(ModemError::BadDumpSize {
            path: path.display().to_string(),
            bytes: bytes.len(),
            channels: n_channels,
        });
    }
    let n = bytes.len() / per_pol;
    let samples = read_complex64(&bytes);
    Ok(samples
        .chunks_exact(2 * n)
        .enumerate()
        .map(|(ch, c)| SymbolFrame {
            channel_index: ch,
            x_pol: c[..n].to_vec(),
            y_pol: c[n..].to_vec(),
            seed_record: SeedRecord { x: 0, y: 0 },
        })
        .collect())
}
