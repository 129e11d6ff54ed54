//! Dispersion of the driven array: wavenumber, group velocity and EIT
//! window width, each by numerical differentiation of the transfer-matrix
//! response and by the closed-form expressions for independent atoms.
//!
//! [`decompose_window`] splits `M11 = G1 F1^n + G2 F2^n` and expresses
//! `-d2 ln T / d delta2` as an explicit function of `n`, which exposes the
//! damped oscillation of the window width with the number of atoms.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{derivative_checked, ComplexValue, Order};
use crate::params::AtomParams;
use crate::scattering::{
    reflection_coeff, ArrayGeometry, Branch, ClosedFormParts, DriveConfig, ScatteringModel,
};

/// Relative change allowed between successive step halvings.
pub const STEP_TOLERANCE: f64 = 1e-3;

/// Phase jump between neighbouring samples above which the unwrapping walk
/// refines its step.
const MAX_PHASE_JUMP: f64 = PI / 4.0;

/// Finite-difference step for derivatives at zero detuning:
/// `1e-4 * max(|Omega|, gamma_eg)`.
pub fn default_step(atom: &AtomParams, rabi: f64) -> f64 {
    1e-4 * rabi.abs().max(atom.gamma_eg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Numeric,
    Analytic,
    Decomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionResult {
    /// Wavenumber at zero detuning, 1/m.
    pub k: f64,
    /// Group velocity, m/s.
    pub group_velocity: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowResult {
    /// Window width, rad/s.
    pub width: f64,
    pub method: Method,
}

fn require_length(geom: &ArrayGeometry) -> Result<f64> {
    if geom.n() < 2 || geom.spacing() <= 0.0 {
        return Err(Error::ZeroLength(geom.n()));
    }
    Ok(geom.length())
}

fn wrap(phase: f64) -> f64 {
    let w = phase.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Phase of `1/M11` measured relative to the bare line, principal value.
fn residual_phase(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    model: ScatteringModel,
    delta: f64,
) -> Result<f64> {
    let amp = model.amplitude(atom, rabi, geom, delta)?;
    let bare = (geom.n() as f64 - 1.0) * geom.phase(atom.omega_eg() + delta);
    Ok((amp * ComplexValue::from_polar(1.0, -bare)).arg())
}

/// Continuous phase of `1/M11` at `delta`: the bare-line phase
/// `(n-1) * phi(omega_s)` plus the medium's contribution, unwrapped along a
/// walk from zero detuning with steps no larger than `max_step`.
pub fn unwrapped_phase(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    model: ScatteringModel,
    delta: f64,
    max_step: f64,
) -> Result<f64> {
    if !(max_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step {max_step} must be positive"
        )));
    }
    let mut x = 0.0;
    let mut prev = residual_phase(atom, rabi, geom, model, 0.0)?;
    let mut total = prev;
    let mut step = max_step;
    let min_step = max_step * 1e-9;
    while x != delta {
        let remaining = delta - x;
        let s = step.min(remaining.abs()).copysign(remaining);
        let next = residual_phase(atom, rabi, geom, model, x + s)?;
        let jump = wrap(next - prev);
        if jump.abs() > MAX_PHASE_JUMP && step > min_step {
            step *= 0.5;
            continue;
        }
        total += jump;
        prev = next;
        x = if s.abs() == remaining.abs() {
            delta
        } else {
            x + s
        };
        step = (step * 2.0).min(max_step);
    }
    Ok(total + (geom.n() as f64 - 1.0) * geom.phase(atom.omega_eg() + delta))
}

/// Wavenumber `k = arg(1/M11) / d` at the drive's detuning, with the
/// argument unwrapped continuously from zero detuning.
pub fn wavenumber(atom: &AtomParams, drive: &DriveConfig, geom: &ArrayGeometry) -> Result<f64> {
    wavenumber_with_step(atom, drive, geom, 10.0 * default_step(atom, drive.rabi))
}

pub fn wavenumber_with_step(
    atom: &AtomParams,
    drive: &DriveConfig,
    geom: &ArrayGeometry,
    max_step: f64,
) -> Result<f64> {
    let d = require_length(geom)?;
    let phase = unwrapped_phase(
        atom,
        drive.rabi,
        geom,
        ScatteringModel::Full,
        drive.detuning,
        max_step,
    )?;
    Ok(phase / d)
}

/// Group velocity `(dk/d omega_s)^-1` at zero detuning by central
/// differences of the unwrapped phase.
pub fn group_velocity_numeric(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
) -> Result<DispersionResult> {
    group_velocity_with_model(atom, rabi, geom, ScatteringModel::Full)
}

pub fn group_velocity_with_model(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    model: ScatteringModel,
) -> Result<DispersionResult> {
    let d = require_length(geom)?;
    if !(rabi > 0.0) {
        return Err(Error::InvalidRegime(
            "group velocity needs an open window (|Omega| > 0)".into(),
        ));
    }
    let h = default_step(atom, rabi);
    let phase = |x: f64| -> ComplexValue {
        unwrapped_phase(atom, rabi, geom, model, x, h)
            .map(ComplexValue::from)
            .unwrap_or(ComplexValue::new(f64::NAN, 0.0))
    };
    let dphase = derivative_checked(phase, 0.0, Order::First, h, STEP_TOLERANCE)?.re;
    if !dphase.is_finite() {
        return Err(Error::UnstableDerivative(
            "phase derivative is not finite".into(),
        ));
    }
    let k = unwrapped_phase(atom, rabi, geom, model, 0.0, h)? / d;
    Ok(DispersionResult {
        k,
        group_velocity: d / dphase,
        method: Method::Numeric,
    })
}

/// Group velocity of independent atoms:
/// `v_g = (1/c + 2 n gamma_eg / ((n-1) l |Omega|^2))^-1`.
pub fn group_velocity_analytic(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
) -> Result<DispersionResult> {
    let d = require_length(geom)?;
    if !(rabi > 0.0) {
        return Err(Error::InvalidRegime(
            "group velocity needs |Omega| > 0".into(),
        ));
    }
    let c = geom.line_speed();
    let n = geom.n() as f64;
    let slowness = 1.0 / c + 2.0 * n * atom.gamma_eg() / (d * rabi * rabi);
    Ok(DispersionResult {
        k: atom.omega_eg() / c,
        group_velocity: 1.0 / slowness,
        method: Method::Analytic,
    })
}

/// Window width from the curvature of `ln T` at zero detuning:
/// `w^2 = -2 / (d2 ln T / d delta2)`.
pub fn window_width_numeric(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
) -> Result<WindowResult> {
    window_width_with_model(atom, rabi, geom, ScatteringModel::Full)
}

pub fn window_width_with_model(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    model: ScatteringModel,
) -> Result<WindowResult> {
    let h = default_step(atom, rabi);
    let ln_t = |x: f64| -> ComplexValue {
        model
            .ln_transmission(atom, rabi, geom, x)
            .map(ComplexValue::from)
            .unwrap_or(ComplexValue::new(f64::NAN, 0.0))
    };
    let curvature = derivative_checked(ln_t, 0.0, Order::Second, h, STEP_TOLERANCE)?.re;
    if !(curvature < 0.0) {
        return Err(Error::NotAWindow(curvature));
    }
    Ok(WindowResult {
        width: (-2.0 / curvature).sqrt(),
        method: Method::Numeric,
    })
}

/// Window width of independent atoms,
/// `w = |Omega|^2 / (4 gamma_eg beta sqrt(2n))` with
/// `beta = |Omega|^2 sqrt(((G_e + 2G_s)|Omega|^2 - 4G_s^3) / (2 gamma_eg (4 G_e G_s + |Omega|^2)^3))`.
pub fn window_width_analytic(atom: &AtomParams, rabi: f64, n: usize) -> Result<WindowResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let (ge, gs, geg) = (atom.gamma_e(), atom.gamma_s(), atom.gamma_eg());
    let o2 = rabi * rabi;
    let radicand = (ge + 2.0 * gs) * o2 - 4.0 * gs.powi(3);
    if !(radicand > 0.0) {
        return Err(Error::InvalidRegime(format!(
            "window formula needs (G_e + 2G_s)|Omega|^2 > 4 G_s^3 (radicand {radicand:e})"
        )));
    }
    let beta = o2 * (radicand / (2.0 * geg * (4.0 * ge * gs + o2).powi(3))).sqrt();
    Ok(WindowResult {
        width: o2 / (4.0 * geg * beta * (2.0 * n as f64).sqrt()),
        method: Method::Analytic,
    })
}

/// Coefficients of `M11 = G1 F1^n + G2 F2^n` and of its detuning
/// derivatives at zero detuning. Index 0 is the branch with the smaller
/// `|G|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionCoeffs {
    pub f: [ComplexValue; 2],
    pub g: [ComplexValue; 2],
    /// `G (d ln F)^2`
    pub a: [ComplexValue; 2],
    /// `G d2 ln F + 2 G' d ln F`
    pub b: [ComplexValue; 2],
    /// `G''`
    pub c: [ComplexValue; 2],
    /// `G d ln F`
    pub b_prime: [ComplexValue; 2],
    /// `G'`
    pub c_prime: [ComplexValue; 2],
}

impl DecompositionCoeffs {
    /// `|F1 F2 - 1|`.
    pub fn product_defect(&self) -> f64 {
        (self.f[0] * self.f[1] - ComplexValue::new(1.0, 0.0)).norm()
    }

    /// `|a_j G_j - b'_j^2| / |b'_j^2|` for each branch.
    pub fn square_defects(&self) -> [f64; 2] {
        [0, 1].map(|j| {
            let lhs = self.a[j] * self.g[j];
            let rhs = self.b_prime[j] * self.b_prime[j];
            (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
        })
    }
}

/// Leading behaviour of `w(n)^-2 = -1/2 d2 ln T / d delta2`:
/// `linear * n + offset + amplitude * damping^(2n) * cos(frequency * n + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowModulation {
    pub linear: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub damping: f64,
    pub frequency: f64,
}

impl WindowModulation {
    pub fn inverse_square_width(&self, n: usize) -> f64 {
        let n = n as f64;
        self.linear * n
            + self.offset
            + self.amplitude * self.damping.powf(2.0 * n) * (self.frequency * n + self.phase).cos()
    }

    pub fn width(&self, n: usize) -> f64 {
        self.inverse_square_width(n).sqrt().recip()
    }
}

/// Window decomposition at fixed drive and spacing; `n` stays free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDecomposition {
    pub coeffs: DecompositionCoeffs,
}

fn weighted(x: &[ComplexValue; 2], f_n: &[ComplexValue; 2]) -> ComplexValue {
    x[0] * f_n[0] + x[1] * f_n[1]
}

impl WindowDecomposition {
    fn powers(&self, n: usize) -> [ComplexValue; 2] {
        let n = n as u32;
        [self.coeffs.f[0].powu(n), self.coeffs.f[1].powu(n)]
    }

    /// `M11` reassembled from the coefficients.
    pub fn m11(&self, n: usize) -> ComplexValue {
        weighted(&self.coeffs.g, &self.powers(n))
    }

    /// `-d2 ln T / d delta2` keeping every term.
    pub fn minus_curvature(&self, n: usize) -> f64 {
        let c = &self.coeffs;
        let p = self.powers(n);
        let s = weighted(&c.g, &p);
        let sa = weighted(&c.a, &p);
        let sb = weighted(&c.b, &p);
        let sc = weighted(&c.c, &p);
        let sbp = weighted(&c.b_prime, &p);
        let scp = weighted(&c.c_prime, &p);
        let nf = n as f64;
        let x =
            (s * sa - sbp * sbp) * (nf * nf) + (s * sb - sbp * scp * 2.0) * nf + s * sc - scp * scp;
        2.0 * (x / (s * s)).re
    }

    /// The same quantity regrouped with `F1 F2 = 1` and `a_j G_j = b'_j^2`.
    pub fn minus_curvature_regrouped(&self, n: usize) -> f64 {
        let DecompositionCoeffs {
            g,
            a,
            b,
            c,
            b_prime: bp,
            c_prime: cp,
            ..
        } = self.coeffs;
        let p = self.powers(n);
        let s = weighted(&g, &p);
        let nf = n as f64;
        let f1_2n = p[0] * p[0];
        let f2_2n = p[1] * p[1];
        let quad = a[1] * g[0] + a[0] * g[1] - bp[0] * bp[1] * 2.0;
        let lin = (b[0] * g[0] - bp[0] * cp[0] * 2.0) * f1_2n
            + (b[1] * g[0] + b[0] * g[1] - bp[0] * cp[1] * 2.0 - bp[1] * cp[0] * 2.0)
            + (b[1] * g[1] - bp[1] * cp[1] * 2.0) * f2_2n;
        let cons = (c[0] * g[0] - cp[0] * cp[0]) * f1_2n
            + (c[1] * g[0] + c[0] * g[1] - cp[0] * cp[1] * 2.0)
            + (c[1] * g[1] - cp[1] * cp[1]) * f2_2n;
        2.0 * ((quad * nf * nf + lin * nf + cons) / (s * s)).re
    }

    /// Window width `sqrt(2 / (-d2 ln T / d delta2))` for `n` atoms.
    pub fn width(&self, n: usize) -> Result<f64> {
        let m = self.minus_curvature(n);
        if !(m > 0.0) {
            return Err(Error::NotAWindow(-m));
        }
        Ok((2.0 / m).sqrt())
    }

    /// Named cross terms of the regrouped expression.
    pub fn cross_terms(&self) -> CrossTerms {
        let DecompositionCoeffs {
            g,
            a,
            b,
            c,
            b_prime: bp,
            c_prime: cp,
            ..
        } = self.coeffs;
        CrossTerms {
            quadratic: a[1] * g[0] + a[0] * g[1] - bp[0] * bp[1] * 2.0,
            linear_small: b[0] * g[0] - bp[0] * cp[0] * 2.0,
            linear_mixed: b[1] * g[0] + b[0] * g[1] - bp[0] * cp[1] * 2.0 - bp[1] * cp[0] * 2.0,
            linear_dominant: b[1] * g[1] - bp[1] * cp[1] * 2.0,
            constant_small: c[0] * g[0] - cp[0] * cp[0],
            constant_mixed: c[1] * g[0] + c[0] * g[1] - cp[0] * cp[1] * 2.0,
            constant_dominant: c[1] * g[1] - cp[1] * cp[1],
        }
    }

    /// Drops the `n^2` term and the small branch's `F^(2n)` terms, and
    /// approximates `S^2` by the dominant branch alone.
    pub fn modulation(&self) -> WindowModulation {
        let t = self.cross_terms();
        let g2 = self.coeffs.g[1] * self.coeffs.g[1];
        let osc = t.constant_mixed / g2;
        let f_small = self.coeffs.f[0];
        WindowModulation {
            linear: (t.linear_dominant / g2).re,
            offset: (t.constant_dominant / g2).re,
            amplitude: osc.norm(),
            phase: osc.arg(),
            damping: f_small.norm(),
            frequency: 2.0 * f_small.arg(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTerms {
    pub quadratic: ComplexValue,
    pub linear_small: ComplexValue,
    pub linear_mixed: ComplexValue,
    pub linear_dominant: ComplexValue,
    pub constant_small: ComplexValue,
    pub constant_mixed: ComplexValue,
    pub constant_dominant: ComplexValue,
}

/// `[F1, F2, G1, G2]` at detuning `delta`, with the square-root branch
/// chosen closest to `reference_b` when given.
fn branch_values(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
    delta: f64,
    reference_b: Option<ComplexValue>,
) -> ([ComplexValue; 4], ComplexValue) {
    let r = reflection_coeff(
        atom,
        &DriveConfig {
            rabi,
            detuning: delta,
        },
    );
    let phi = geom.phase(atom.omega_eg() + delta);
    let mut parts = ClosedFormParts::new(r, phi, Branch::Principal);
    if let Some(b0) = reference_b {
        if (parts.b + b0).norm() < (parts.b - b0).norm() {
            parts.b = -parts.b;
        }
    }
    let ClosedFormParts { a_plus, a_minus, b } = parts;
    let one = ComplexValue::new(1.0, 0.0);
    let g_den = ComplexValue::from_polar(2.0, -phi) * b;
    let f_den = ComplexValue::from_polar(2.0, phi) * (r - one);
    let values = [
        (a_minus + b) / f_den,
        (a_minus - b) / f_den,
        (a_plus + b) / g_den,
        -(a_plus - b) / g_den,
    ];
    (values, b)
}

/// Decomposes the window curvature at zero detuning. Detuning derivatives
/// of `F_j` and `G_j` are central differences with the step-halving check.
pub fn decompose_window(
    atom: &AtomParams,
    rabi: f64,
    geom: &ArrayGeometry,
) -> Result<WindowDecomposition> {
    if !(rabi > 0.0) {
        return Err(Error::InvalidRegime(
            "decomposition needs |Omega| > 0".into(),
        ));
    }
    let (_, mut b0) = branch_values(atom, rabi, geom, 0.0, None);
    let (probe, _) = branch_values(atom, rabi, geom, 0.0, Some(b0));
    // label the branch with the smaller |G| as index 0
    if probe[2].norm() > probe[3].norm() {
        b0 = -b0;
    }
    if b0.norm() < 1e-12 {
        return Err(Error::DegenerateB(b0.norm()));
    }
    let (v0, _) = branch_values(atom, rabi, geom, 0.0, Some(b0));
    let h = default_step(atom, rabi);

    let component = |idx: usize, order: Order| -> Result<ComplexValue> {
        derivative_checked(
            |x| branch_values(atom, rabi, geom, x, Some(b0)).0[idx],
            0.0,
            order,
            h,
            STEP_TOLERANCE,
        )
    };

    let mut f = [ComplexValue::default(); 2];
    let mut g = [ComplexValue::default(); 2];
    let mut a = [ComplexValue::default(); 2];
    let mut b = [ComplexValue::default(); 2];
    let mut c = [ComplexValue::default(); 2];
    let mut b_prime = [ComplexValue::default(); 2];
    let mut c_prime = [ComplexValue::default(); 2];
    for j in 0..2 {
        f[j] = v0[j];
        g[j] = v0[2 + j];
        let f1 = component(j, Order::First)?;
        let f2 = component(j, Order::Second)?;
        let g1 = component(2 + j, Order::First)?;
        let g2 = component(2 + j, Order::Second)?;
        let dln_f = f1 / f[j];
        let d2ln_f = f2 / f[j] - dln_f * dln_f;
        a[j] = g[j] * dln_f * dln_f;
        b[j] = g[j] * d2ln_f + g1 * dln_f * 2.0;
        c[j] = g2;
        b_prime[j] = g[j] * dln_f;
        c_prime[j] = g1;
    }
    Ok(WindowDecomposition {
        coeffs: DecompositionCoeffs {
            f,
            g,
            a,
            b,
            c,
            b_prime,
            c_prime,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RateConvention;

    const C_LINE: f64 = 1.2e8;

    fn fluxonium() -> AtomParams {
        AtomParams::fluxonium(RateConvention::Angular)
    }

    fn fig2_geometry(n: usize) -> ArrayGeometry {
        ArrayGeometry::new(n, 1.5e-3, C_LINE).unwrap()
    }

    #[test]
    fn bare_line_wavenumber() {
        // a very strong control makes r vanish near resonance
        let atom = fluxonium();
        let geom = fig2_geometry(10);
        let drive = DriveConfig::new(1e15, 0.0).unwrap();
        let k = wavenumber(&atom, &drive, &geom).unwrap();
        assert!((k - atom.omega_eg() / C_LINE).abs() < 1e-6 * k);
    }

    #[test]
    fn wavenumber_needs_two_atoms() {
        let atom = fluxonium();
        let geom = fig2_geometry(1);
        assert_eq!(
            wavenumber(&atom, &DriveConfig::new(2e8, 0.0).unwrap(), &geom),
            Err(Error::ZeroLength(1))
        );
        assert!(matches!(
            group_velocity_analytic(&atom, 2e8, &geom),
            Err(Error::ZeroLength(1))
        ));
    }

    #[test]
    fn wavenumber_independent_of_walk_step() {
        let atom = fluxonium();
        let geom = fig2_geometry(50);
        let drive = DriveConfig::new(218e6, 6e7).unwrap();
        let h = default_step(&atom, drive.rabi);
        let coarse = wavenumber_with_step(&atom, &drive, &geom, 20.0 * h).unwrap();
        let fine = wavenumber_with_step(&atom, &drive, &geom, 10.0 * h).unwrap();
        assert!((coarse - fine).abs() < 1e-3 * fine.abs());
    }

    #[test]
    fn slow_light_at_fig2_parameters() {
        let atom = fluxonium();
        let v = group_velocity_numeric(&atom, 218e6, &fig2_geometry(50)).unwrap();
        assert!(v.group_velocity > 0.0 && v.group_velocity < 0.05 * C_LINE);
    }

    #[test]
    fn huge_drive_restores_line_speed() {
        let atom = fluxonium();
        let v = group_velocity_numeric(&atom, 1e15, &fig2_geometry(20)).unwrap();
        assert!((v.group_velocity / C_LINE - 1.0).abs() < 1e-3);
    }

    #[test]
    fn analytic_group_velocity_limits() {
        let atom = fluxonium().with_gamma_eg(1e-30).unwrap();
        let v = group_velocity_analytic(&atom, 2e8, &fig2_geometry(10)).unwrap();
        assert!((v.group_velocity - C_LINE).abs() < 1e-6 * C_LINE);
    }

    #[test]
    fn halving_drive_quarters_slow_velocity() {
        let atom = fluxonium();
        let geom = fig2_geometry(50);
        let fast = group_velocity_numeric(&atom, 218e6, &geom)
            .unwrap()
            .group_velocity;
        let slow = group_velocity_numeric(&atom, 109e6, &geom)
            .unwrap()
            .group_velocity;
        let ratio = fast / slow;
        assert!((ratio - 4.0).abs() < 0.15, "ratio {ratio}");
    }

    #[test]
    fn passive_array_has_no_window() {
        let atom = fluxonium();
        assert!(matches!(
            window_width_numeric(&atom, 0.0, &fig2_geometry(20)),
            Err(Error::NotAWindow(_))
        ));
    }

    #[test]
    fn scattering_free_width_is_the_analytic_formula() {
        let atom = fluxonium();
        for (rabi, n) in [(218e6, 50), (5e7, 10), (3e8, 120)] {
            let numeric = window_width_with_model(
                &atom,
                rabi,
                &fig2_geometry(n),
                ScatteringModel::ScatteringFree,
            )
            .unwrap()
            .width;
            let analytic = window_width_analytic(&atom, rabi, n).unwrap().width;
            assert!((numeric / analytic - 1.0).abs() < 1e-4, "{rabi} {n}");
        }
    }

    #[test]
    fn analytic_width_scales_as_inverse_root_n() {
        let atom = fluxonium();
        let w1 = window_width_analytic(&atom, 218e6, 25).unwrap().width;
        let w4 = window_width_analytic(&atom, 218e6, 100).unwrap().width;
        assert!((w4 / w1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn analytic_width_finite_without_metastable_decay() {
        let atom = fluxonium().with_gamma_sg(1e-12).unwrap();
        let w = window_width_analytic(&atom, 218e6, 10).unwrap().width;
        // G_s -> 0: beta -> sqrt(G_e / (2 gamma_eg |Omega|^2)) |Omega|^2 / |Omega|^2 ...
        // i.e. w -> |Omega|^2 / (4 sqrt(n G_e gamma_eg))
        let limit = 218e6_f64.powi(2) / (4.0 * (10.0 * atom.gamma_e() * atom.gamma_eg()).sqrt());
        assert!(w.is_finite() && w > 0.0);
        assert!((w / limit - 1.0).abs() < 1e-6, "{w} vs {limit}");
    }

    #[test]
    fn analytic_width_invalid_regime() {
        let atom = fluxonium();
        // radicand (G_e + 2 G_s) W^2 - 4 G_s^3 <= 0 for tiny W
        assert!(matches!(
            window_width_analytic(&atom, 1e-3, 10),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn decomposition_reassembles_m11() {
        let atom = fluxonium();
        let geom = fig2_geometry(7);
        let dec = decompose_window(&atom, 218e6, &geom).unwrap();
        let r = reflection_coeff(&atom, &DriveConfig::new(218e6, 0.0).unwrap());
        let direct = crate::scattering::chain_product_periodic(r, geom.phase(atom.omega_eg()), 7)
            .unwrap()
            .m11;
        assert!((dec.m11(7) - direct).norm() < 1e-10 * direct.norm());
        assert!(dec.coeffs.g[0].norm() < dec.coeffs.g[1].norm());
    }

    #[test]
    fn regrouped_curvature_matches_full() {
        let atom = fluxonium();
        let dec = decompose_window(&atom, 218e6, &fig2_geometry(2)).unwrap();
        for n in [3, 17, 64, 150] {
            let full = dec.minus_curvature(n);
            let regrouped = dec.minus_curvature_regrouped(n);
            assert!((full - regrouped).abs() < 1e-6 * full.abs(), "n = {n}");
        }
    }
}
