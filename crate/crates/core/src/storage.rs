//! Pulse storage: the Gaussian input pulse, the three operating
//! constraints (resonant transparency, slow group velocity, spectral
//! clipping) and the trapped-fraction efficiency.
//!
//! The efficiency of a stored pulse is the largest energy the transmitted
//! temporal profile carries through any window of one transit time
//! `d / v_g`. Under uniform slow transport that is the energy inside the
//! medium when the control field is switched off at the best moment.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::{group_velocity_analytic, window_width_analytic};
use crate::error::{Error, Result};
use crate::numerics::{
    discrete_energy, find_root, golden_section_max, spectrum_to_time, ComplexValue, SampledGrid,
};
use crate::params::AtomParams;
use crate::scattering::{reflection_coeff, ArrayGeometry, DriveConfig, ScatteringModel};

/// Largest fraction of the input energy allowed outside the grid.
pub const MAX_OUTSIDE_ENERGY: f64 = 1e-3;

/// Discretisation of a Gaussian pulse spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseGrid {
    /// Grid half-span in units of `sigma`.
    pub span: f64,
    /// Number of samples; a power of two.
    pub points: usize,
    /// Zero-padding factor applied before transforming to time.
    pub oversample: usize,
}

impl Default for PulseGrid {
    fn default() -> Self {
        Self {
            span: 10.0,
            points: 1 << 14,
            oversample: 8,
        }
    }
}

impl PulseGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "span {} must be positive",
                self.span
            )));
        }
        if !self.points.is_power_of_two() || self.points < 16 {
            return Err(Error::NonPowerOfTwo(self.points));
        }
        if !self.oversample.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(self.oversample));
        }
        Ok(())
    }
}

/// Gaussian input spectrum `E_in(delta) = (pi sigma^2)^(-1/4) exp(-delta^2 / (2 sigma^2))`,
/// normalised so that `integral |E_in|^2 d delta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseSpec {
    /// Spectral standard deviation of the field amplitude, rad/s.
    pub sigma: f64,
    pub grid: PulseGrid,
    /// Global phase applied to the whole spectrum.
    pub global_phase: f64,
}

impl PulseSpec {
    pub fn new(sigma: f64, grid: PulseGrid) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma {sigma} must be positive"
            )));
        }
        grid.validate()?;
        Ok(Self {
            sigma,
            grid,
            global_phase: 0.0,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.grid.span * self.sigma / self.grid.points as f64
    }

    pub fn detunings(&self) -> Vec<f64> {
        let step = self.step();
        let half = (self.grid.points / 2) as f64;
        (0..self.grid.points)
            .map(|k| (k as f64 - half) * step)
            .collect()
    }

    pub fn amplitude(&self, delta: f64) -> ComplexValue {
        let norm = (PI * self.sigma * self.sigma).powf(-0.25);
        let mag = norm * (-delta * delta / (2.0 * self.sigma * self.sigma)).exp();
        ComplexValue::from_polar(mag, self.global_phase)
    }

    /// Input spectrum sampled on the pulse grid.
    pub fn input(&self) -> Result<SampledGrid> {
        let ys = self
            .detunings()
            .into_iter()
            .map(|d| self.amplitude(d))
            .collect();
        SampledGrid::centered(self.step(), ys)
    }

    /// Transmitted spectrum `E_in / M11`.
    pub fn output(
        &self,
        atom: &AtomParams,
        rabi: f64,
        geom: &ArrayGeometry,
    ) -> Result<SampledGrid> {
        let deltas = self.detunings();
        let ys = deltas
            .par_iter()
            .map(|&d| Ok(self.amplitude(d) * ScatteringModel::Full.amplitude(atom, rabi, geom, d)?))
            .collect::<Result<Vec<_>>>()?;
        SampledGrid::centered(self.step(), ys)
    }
}

/// Operating constraints and numerical settings of the storage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageOptions {
    /// Scattering-free resonant transmission the control field must reach.
    pub target_transmission: f64,
    /// Group velocity as a fraction of the line speed.
    pub vg_fraction: f64,
    /// Spectral energy fraction the pulse must keep after the medium.
    pub target_pass: f64,
    pub grid: PulseGrid,
    /// Storage time before retrieval, s.
    pub hold_time: f64,
    /// Multiplier of `gamma_sg` in the optional storage decay
    /// `exp(-hold_time * gamma_sg * kappa)`; zero disables it.
    pub decay_kappa: f64,
}

impl Default for StorageOptions {
    fn default() -> Self {
        Self {
            target_transmission: 0.99,
            vg_fraction: 0.01,
            target_pass: 0.98,
            grid: PulseGrid::default(),
            hold_time: 0.0,
            decay_kappa: 0.0,
        }
    }
}

/// Resonant reflection coefficient (real) for a given control modulus.
fn resonant_reflection(atom: &AtomParams, rabi: f64) -> f64 {
    reflection_coeff(
        atom,
        &DriveConfig {
            rabi,
            detuning: 0.0,
        },
    )
    .re
}

/// Control modulus for which independent atoms transmit `target_t` on
/// resonance, i.e. `exp(-2 n Re r(0)) = target_t`.
pub fn solve_rabi(atom: &AtomParams, n: usize, target_t: f64) -> Result<f64> {
    if !(target_t > 0.0 && target_t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target transmission {target_t} must lie in (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let required = -target_t.ln() / (2.0 * n as f64);
    let passive = resonant_reflection(atom, 0.0);
    if required > passive {
        return Err(Error::NoSolution(format!(
            "transmission {target_t} is below the passive value exp(-2n r(0)) = {:e}",
            (-2.0 * n as f64 * passive).exp()
        )));
    }
    if required == passive {
        return Ok(0.0);
    }
    let g = |rabi: f64| resonant_reflection(atom, rabi) - required;
    let mut hi = atom.gamma_eg().max(atom.gamma_e());
    let mut guard = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NoSolution("control modulus diverges".into()));
        }
    }
    find_root(g, 0.0, hi, 1e-13 * hi)
}

/// Spacing for which the independent-atom group velocity equals
/// `fraction * c`: `l = 2 n gamma_eg c f / ((1 - f)(n - 1) |Omega|^2)`.
pub fn solve_separation(
    atom: &AtomParams,
    n: usize,
    rabi: f64,
    fraction: f64,
    line_speed: f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::ZeroLength(n));
    }
    if !(rabi > 0.0) {
        return Err(Error::InvalidParameter(
            "control modulus must be positive".into(),
        ));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "velocity fraction {fraction} must lie in (0, 1)"
        )));
    }
    let nf = n as f64;
    Ok(2.0 * nf * atom.gamma_eg() * line_speed * fraction
        / ((1.0 - fraction) * (nf - 1.0) * rabi * rabi))
}

/// Spectral energy `sum |E_in|^2 T d delta` that survives the medium.
pub fn transmitted_fraction(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    pulse: &PulseSpec,
) -> Result<f64> {
    discrete_energy(&pulse.output(atom, rabi, geom)?)
}

/// Pulse width whose transmitted spectral energy equals `target_pass`.
/// Searches upward from a narrow pulse for the first crossing: far
/// detuned components pass the medium again, so the transmitted fraction
/// is not monotone over all `sigma`.
pub fn solve_sigma(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    target_pass: f64,
    grid: PulseGrid,
) -> Result<f64> {
    if !(target_pass > 0.0 && target_pass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target {target_pass} must lie in (0, 1)"
        )));
    }
    let excess = |sigma: f64| -> Result<f64> {
        Ok(transmitted_fraction(atom, rabi, geom, &PulseSpec::new(sigma, grid)?)? - target_pass)
    };
    let window = window_width_analytic(atom, rabi, geom.n())
        .map(|w| w.width)
        .unwrap_or(atom.gamma_eg());
    let mut lo = 1e-3 * window;
    if excess(lo)? <= 0.0 {
        return Err(Error::NoSolution(format!(
            "resonant transmission is below the target {target_pass}"
        )));
    }
    let mut hi = lo;
    let mut steps = 0;
    loop {
        let next = hi * 1.5;
        if excess(next)? < 0.0 {
            lo = hi;
            hi = next;
            break;
        }
        hi = next;
        steps += 1;
        if steps > 200 {
            return Err(Error::NoSolution(
                "transmitted fraction never drops to the target".into(),
            ));
        }
    }
    let mut failure = None;
    let root = find_root(
        |s| match excess(s) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-10 * hi,
    );
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

/// Efficiency and the numbers behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Efficiency {
    pub eta: f64,
    /// Transit time `d / v_g`, s.
    pub transit_time: f64,
    /// Best switch-off time on the centred time axis, s.
    pub switch_off: f64,
    pub spectral_energy: f64,
    pub temporal_energy: f64,
    /// Input energy captured by the grid.
    pub input_energy: f64,
}

/// Trapped fraction for explicit parameters.
pub fn storage_efficiency(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    pulse: &PulseSpec,
    options: &StorageOptions,
) -> Result<Efficiency> {
    let input_energy = discrete_energy(&pulse.input()?)?;
    let outside = 1.0 - input_energy;
    if outside > MAX_OUTSIDE_ENERGY {
        return Err(Error::GridTooNarrow { outside });
    }
    let spectrum = pulse.output(atom, rabi, geom)?;
    let spectral_energy = discrete_energy(&spectrum)?;
    if rabi == 0.0 {
        // nothing to switch off: the medium cannot hold the pulse
        return Ok(Efficiency {
            eta: 0.0,
            transit_time: f64::INFINITY,
            switch_off: f64::NAN,
            spectral_energy,
            temporal_energy: spectral_energy,
            input_energy,
        });
    }
    let signal = spectrum_to_time(&spectrum.zero_padded(pulse.grid.oversample)?)?;
    let dt = signal.spacing().ok_or(Error::NonUniformGrid)?;
    let power: Vec<f64> = signal.ys().iter().map(|y| y.norm_sqr() * dt).collect();
    let temporal_energy: f64 = power.iter().sum();

    let transit_time = if geom.n() >= 2 {
        geom.length() / group_velocity_analytic(atom, rabi, geom)?.group_velocity
    } else {
        f64::INFINITY
    };
    let m = power.len();
    let period = m as f64 * dt;
    let (eta, switch_off) = if transit_time >= period {
        (temporal_energy, signal.xs()[0])
    } else {
        best_window(&power, transit_time / dt, signal.xs()[0], dt)
    };
    let decay = (-options.hold_time * atom.gamma_sg() * options.decay_kappa).exp();
    Ok(Efficiency {
        eta: (eta * decay).clamp(0.0, 1.0),
        transit_time,
        switch_off,
        spectral_energy,
        temporal_energy,
        input_energy,
    })
}

/// Largest energy in a window of `width` samples on the periodic time
/// axis. Samples are cells of constant power; the window start is scanned
/// over cell edges and then refined by golden section.
fn best_window(power: &[f64], width: f64, t_start: f64, dt: f64) -> (f64, f64) {
    let m = power.len();
    let mut cumulative = Vec::with_capacity(2 * m + 1);
    cumulative.push(0.0);
    for k in 0..2 * m {
        let last = cumulative[k];
        cumulative.push(last + power[k % m]);
    }
    let energy_to = |x: f64| -> f64 {
        let x = x.clamp(0.0, (2 * m) as f64);
        let i = (x.floor() as usize).min(2 * m - 1);
        cumulative[i] + (x - i as f64) * power[i % m]
    };
    let window = |x: f64| energy_to(x + width) - energy_to(x);

    let (best_edge, _) =
        (0..m)
            .map(|k| (k, window(k as f64)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, e)| if e > acc.1 { (k, e) } else { acc },
            );
    let lo = (best_edge as f64 - 1.0).max(0.0);
    let hi = best_edge as f64 + 1.0;
    let (x, e) = golden_section_max(window, lo, hi, 1e-6);
    let coarse = window(best_edge as f64);
    let (x, e) = if coarse > e {
        (best_edge as f64, coarse)
    } else {
        (x, e)
    };
    (e, t_start + (x - 0.5) * dt)
}

/// Solved operating point and efficiency for one array size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageResult {
    pub n: usize,
    /// Inter-atom spacing, m.
    pub spacing: f64,
    /// Control modulus, rad/s.
    pub rabi: f64,
    /// Pulse spectral width, rad/s.
    pub sigma: f64,
    pub eta: f64,
    /// Full transfer-matrix transmission on resonance.
    pub t0: f64,
    /// Independent-atom transmission on resonance.
    pub t0_scattering_free: f64,
    /// Group velocity from the independent-atom formula, m/s.
    pub group_velocity: f64,
    pub transit_time: f64,
    pub clipped_fraction: f64,
    pub spectral_energy: f64,
    pub temporal_energy: f64,
}

/// Solves the three constraints for `n` atoms and evaluates the efficiency.
pub fn solve_storage(
    atom: &AtomParams,
    n: usize,
    line_speed: f64,
    options: &StorageOptions,
) -> Result<StorageResult> {
    let rabi = solve_rabi(atom, n, options.target_transmission)?;
    let spacing = solve_separation(atom, n, rabi, options.vg_fraction, line_speed)?;
    let geom = ArrayGeometry::new(n, spacing, line_speed)?;
    let sigma = solve_sigma(atom, rabi, &geom, options.target_pass, options.grid)?;
    evaluate_storage(atom, &geom, rabi, sigma, options)
}

/// Efficiency and diagnostics at an explicit operating point.
pub fn evaluate_storage(
    atom: &AtomParams,
    geom: &ArrayGeometry,
    rabi: f64,
    sigma: f64,
    options: &StorageOptions,
) -> Result<StorageResult> {
    let pulse = PulseSpec::new(sigma, options.grid)?;
    let eff = storage_efficiency(atom, rabi, geom, &pulse, options)?;
    let t0 = ScatteringModel::Full
        .amplitude(atom, rabi, geom, 0.0)?
        .norm_sqr();
    let t0_free = ScatteringModel::ScatteringFree
        .ln_transmission(atom, rabi, geom, 0.0)?
        .exp();
    let group_velocity = group_velocity_analytic(atom, rabi, geom)?.group_velocity;
    Ok(StorageResult {
        n: geom.n(),
        spacing: geom.spacing(),
        rabi,
        sigma,
        eta: eff.eta,
        t0,
        t0_scattering_free: t0_free,
        group_velocity,
        transit_time: eff.transit_time,
        clipped_fraction: 1.0 - eff.spectral_energy,
        spectral_energy: eff.spectral_energy,
        temporal_energy: eff.temporal_energy,
    })
}

/// One entry of an efficiency sweep; failures are kept per `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub n: usize,
    pub result: Result<StorageResult>,
}

/// Runs [`solve_storage`] for every `n`, in parallel, keeping input order.
pub fn efficiency_sweep(
    atom: &AtomParams,
    ns: &[usize],
    line_speed: f64,
    options: &StorageOptions,
) -> Vec<SweepEntry> {
    ns.par_iter()
        .map(|&n| SweepEntry {
            n,
            result: solve_storage(atom, n, line_speed, options),
        })
        .collect()
}
