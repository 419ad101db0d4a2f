//! Forward fibre propagation: split-step Fourier solution of the Manakov
//! equation span by span, followed by lumped EDFA gain and ASE loading.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{db_to_linear, span_gain_db, FiberSpec, LinkSpec, StepRule, PHYSICAL};
use crate::modem::{stream_rng, StreamTag};
use crate::sigproc::{frequencies, SampledField, Spectral};

/// Below this value of alpha*L the logarithmic rule uses its small-loss expansion.
const LOSSLESS_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    /// Step boundaries in km, from 0 to the span length.
    pub boundaries: Vec<f64>,
}

impl StepPlan {
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.boundaries.windows(2).map(|w| w[1] - w[0])
    }

    pub fn n_steps(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.boundaries.last().expect("plan has boundaries")
    }
}

/// Boundaries that put an equal share of the power-length integral in each step:
/// `z_k = -ln(1 - (k/N)(1 - exp(-alpha L))) / alpha`.
pub fn log_step_boundaries(length: f64, alpha_np_per_km: f64, n: usize) -> StepPlan {
    assert!(n >= 1, "at least one step");
    let a = alpha_np_per_km;
    let boundaries = (0..=n)
        .map(|k| {
            let r = k as f64 / n as f64;
            if k == n {
                length
            } else if a * length < LOSSLESS_THRESHOLD {
                r * length * (1.0 - a * length * (1.0 - r) / 2.0)
            } else {
                -(1.0 - r * (1.0 - (-a * length).exp())).ln() / a
            }
        })
        .collect();
    StepPlan { boundaries }
}

pub fn uniform_step_boundaries(length: f64, n: usize) -> StepPlan {
    assert!(n >= 1, "at least one step");
    StepPlan {
        boundaries: (0..=n).map(|k| length * k as f64 / n as f64).collect(),
    }
}

pub fn step_plan(fiber: &FiberSpec, steps: usize) -> StepPlan {
    match fiber.step_rule {
        StepRule::Logarithmic => log_step_boundaries(fiber.span_length, fiber.alpha_np_per_km(), steps),
        StepRule::Uniform => uniform_step_boundaries(fiber.span_length, steps),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Fibre coefficients resolved at the operating wavelength, in km-based SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberModel {
    /// Np/km (power)
    pub alpha: f64,
    /// s^2/km
    pub beta2: f64,
    /// 1/W/km, Manakov factor included
    pub gamma: f64,
}

impl FiberModel {
    pub fn new(fiber: &FiberSpec, wavelength: f64) -> Self {
        FiberModel {
            alpha: fiber.alpha_np_per_km(),
            beta2: fiber.beta2_s2_per_km(wavelength),
            gamma: fiber.effective_gamma(),
        }
    }

    /// Nonlinear length weighting for the power sampled after the first
    /// half-step: `2 sinh(alpha h / 2) / alpha`. Multiplied by that power it
    /// equals step-start power times `(1 - exp(-alpha h)) / alpha`.
    pub fn nonlinear_length(&self, h: f64) -> f64 {
        let x = self.alpha * h / 2.0;
        if x.abs() < 1e-8 {
            h
        } else {
            2.0 * x.sinh() / self.alpha
        }
    }
}

/// Split-step engine bound to one sampling grid.
pub struct Propagator {
    model: FiberModel,
    spectral: Spectral,
    omega2: Vec<f64>,
    response: Vec<Complex64>,
}

impl Propagator {
    pub fn new(model: FiberModel, n: usize, sample_rate: f64) -> Self {
        let omega2 = frequencies(n, sample_rate)
            .into_iter()
            .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
            .collect();
        Propagator {
            model,
            spectral: Spectral::new(n),
            omega2,
            response: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn model(&self) -> &FiberModel {
        &self.model
    }

    /// Dispersion and loss over `dz` km; negative `dz` undoes them.
    pub fn linear(&mut self, field: &mut SampledField, dz: f64) {
        if dz == 0.0 {
            return;
        }
        let amp = (-self.model.alpha * dz / 2.0).exp();
        let c = self.model.beta2 / 2.0 * dz;
        for (r, w2) in self.response.iter_mut().zip(&self.omega2) {
            *r = Complex64::from_polar(amp, c * w2);
        }
        for pol in [&mut field.x_pol, &mut field.y_pol] {
            self.spectral.forward(pol);
            pol.iter_mut().zip(&self.response).for_each(|(v, g)| *v *= g);
            self.spectral.inverse(pol);
        }
    }

    /// Joint Kerr phase rotation of both polarisations; `sign` is +1 forward, -1 backward.
    pub fn nonlinear(&self, field: &mut SampledField, h: f64, sign: f64) {
        let k = sign * self.model.gamma * self.model.nonlinear_length(h);
        if k == 0.0 {
            return;
        }
        for (x, y) in field.x_pol.iter_mut().zip(field.y_pol.iter_mut()) {
            let rot = Complex64::from_polar(1.0, k * (x.norm_sqr() + y.norm_sqr()));
            *x *= rot;
            *y *= rot;
        }
    }

    /// One symmetric step: half linear, full nonlinear, half linear.
    pub fn step(&mut self, field: &mut SampledField, h: f64, direction: Direction) {
        match direction {
            Direction::Forward => {
                self.linear(field, h / 2.0);
                self.nonlinear(field, h, 1.0);
                self.linear(field, h / 2.0);
            }
            Direction::Backward => {
                self.linear(field, -h / 2.0);
                self.nonlinear(field, h, -1.0);
                self.linear(field, -h / 2.0);
            }
        }
    }

    /// Runs a whole step plan, merging adjacent linear half-steps. Backward
    /// traverses the plan from its far end, inverting each forward step.
    pub fn run_plan(&mut self, field: &mut SampledField, plan: &StepPlan, direction: Direction) {
        let mut steps: Vec<f64> = plan.steps().collect();
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Backward => {
                steps.reverse();
                -1.0
            }
        };
        let mut pending = 0.0;
        for h in steps {
            self.linear(field, sign * (pending + h / 2.0));
            self.nonlinear(field, h, sign);
            pending = h / 2.0;
        }
        self.linear(field, sign * pending);
    }
}

/// A single split step on a copy of the field.
pub fn ssfm_step(field: &SampledField, h: f64, model: &FiberModel, direction: Direction) -> SampledField {
    assert!(h > 0.0, "step length must be positive");
    let mut out = field.clone();
    let mut p = Propagator::new(*model, field.len(), field.sample_rate);
    p.step(&mut out, h, direction);
    out
}

pub fn propagate_span(field: &SampledField, fiber: &FiberSpec, wavelength: f64) -> SampledField {
    let mut p = Propagator::new(FiberModel::new(fiber, wavelength), field.len(), field.sample_rate);
    let mut out = field.clone();
    p.run_plan(&mut out, &step_plan(fiber, fiber.steps_per_span), Direction::Forward);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpModel {
    pub gain_db: f64,
    pub noise_figure_db: f64,
    /// W/Hz in each polarisation.
    pub ase_psd_per_pol: f64,
    pub noiseless: bool,
}

impl AmpModel {
    /// `ase_psd_per_pol = n_sp h nu (G - 1)` with `n_sp = NF/2 * G/(G - 1)`,
    /// which simplifies to `NF/2 * G * h nu` and stays finite at unit gain.
    pub fn new(gain_db: f64, noise_figure_db: f64, carrier_frequency: f64) -> Self {
        let g = db_to_linear(gain_db);
        let nf = db_to_linear(noise_figure_db);
        AmpModel {
            gain_db,
            noise_figure_db,
            ase_psd_per_pol: nf / 2.0 * g * PHYSICAL.h * carrier_frequency,
            noiseless: false,
        }
    }

    pub fn for_link(link: &LinkSpec, wavelength: f64) -> Self {
        let mut amp = Self::new(
            span_gain_db(&link.fiber),
            link.amp_noise_figure_db,
            PHYSICAL.c / wavelength,
        );
        amp.noiseless = link.noiseless;
        amp
    }

    pub fn gain(&self) -> f64 {
        db_to_linear(self.gain_db)
    }
}

/// Lumped amplifier: field gain sqrt(G) plus white circular Gaussian ASE of
/// variance `ase_psd_per_pol * sample_rate` in each polarisation.
pub fn edfa(field: &SampledField, amp: &AmpModel, amplifier_index: usize, master_seed: u64) -> SampledField {
    let mut out = field.clone();
    out.scale(amp.gain().sqrt());
    if amp.noiseless {
        return out;
    }
    let sigma = (amp.ase_psd_per_pol * field.sample_rate / 2.0).sqrt();
    let mut rng = stream_rng(
        master_seed,
        StreamTag::Ase {
            amplifier: amplifier_index,
        },
    );
    for v in out.x_pol.iter_mut().chain(out.y_pol.iter_mut()) {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
    out
}

/// `n_spans` x (fibre span, amplifier); amplifier `s` draws noise from stream `s`.
pub fn propagate_link(field: &SampledField, link: &LinkSpec, wavelength: f64, master_seed: u64) -> SampledField {
    propagate_link_observed(field, link, wavelength, master_seed, |_, _| {})
}

/// Like [`propagate_link`], calling `observer(span, field)` after each amplifier.
pub fn propagate_link_observed<F>(
    field: &SampledField,
    link: &LinkSpec,
    wavelength: f64,
    master_seed: u64,
    mut observer: F,
) -> SampledField
where
    F: FnMut(usize, &SampledField),
{
    let amp = AmpModel::for_link(link, wavelength);
    let plan = step_plan(&link.fiber, link.fiber.steps_per_span);
    let mut p = Propagator::new(
        FiberModel::new(&link.fiber, wavelength),
        field.len(),
        field.sample_rate,
    );
    let mut cur = field.clone();
    for span in 0..link.n_spans {
        if link.fiber.span_length > 0.0 {
            p.run_plan(&mut cur, &plan, Direction::Forward);
        }
        cur = edfa(&cur, &amp, span, master_seed);
        observer(span, &cur);
    }
    cur
}
