//! Scattering of the signal field by a single atom and by the periodic
//! array: reflection coefficient, boundary transfer matrix, free
//! propagation between neighbours, and the array's upper-left response
//! element by brute-force chain product and by closed form.
//!
//! Transfer matrices map the field pair on the right of an element to the
//! pair on its left, so the array response is
//! `M = M_atom * (P * M_atom)^(n-1)` and the transmitted amplitude for a
//! wave incident from the left is `1 / M11`.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexValue;
use crate::params::AtomParams;

const SINGULAR_ATOM_GUARD: f64 = 1e-14;
const DEGENERATE_B_GUARD: f64 = 1e-12;

/// Control field modulus and signal detuning, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub rabi: f64,
    pub detuning: f64,
}

impl DriveConfig {
    pub fn new(rabi: f64, detuning: f64) -> Result<Self> {
        if !(rabi >= 0.0) || !rabi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Rabi modulus {rabi} must be >= 0"
            )));
        }
        if !detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(Self { rabi, detuning })
    }

    /// Control field off, signal on resonance.
    pub fn passive() -> Self {
        Self {
            rabi: 0.0,
            detuning: 0.0,
        }
    }

    pub fn at(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }
}

/// `n` atoms spaced `spacing` metres apart on a line with phase speed
/// `line_speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    n: usize,
    spacing: f64,
    line_speed: f64,
}

impl ArrayGeometry {
    pub fn new(n: usize, spacing: f64, line_speed: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "array needs at least one atom".into(),
            ));
        }
        if !(spacing >= 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spacing {spacing} must be >= 0"
            )));
        }
        if !(line_speed > 0.0) || !line_speed.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "line speed {line_speed} must be positive"
            )));
        }
        Ok(Self {
            n,
            spacing,
            line_speed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn line_speed(&self) -> f64 {
        self.line_speed
    }

    /// Medium length `(n - 1) * l`.
    pub fn length(&self) -> f64 {
        (self.n - 1) as f64 * self.spacing
    }

    /// Line wavelength at angular frequency `omega`.
    pub fn wavelength(&self, omega: f64) -> f64 {
        wavelength(omega, self.line_speed)
    }

    /// Propagation phase `l * omega_s / c` between neighbours.
    pub fn phase(&self, omega_s: f64) -> f64 {
        self.spacing * omega_s / self.line_speed
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        Self::new(n, self.spacing, self.line_speed)
    }

    pub fn with_spacing(self, spacing: f64) -> Result<Self> {
        Self::new(self.n, spacing, self.line_speed)
    }
}

pub fn wavelength(omega: f64, line_speed: f64) -> f64 {
    2.0 * std::f64::consts::PI * line_speed / omega
}

/// Right- and left-moving amplitudes at one point of the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPair {
    pub right: ComplexValue,
    pub left: ComplexValue,
}

/// 2x2 complex transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: ComplexValue,
    pub m12: ComplexValue,
    pub m21: ComplexValue,
    pub m22: ComplexValue,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = ComplexValue::new(1.0, 0.0);
        let zero = ComplexValue::new(0.0, 0.0);
        Self {
            m11: one,
            m12: zero,
            m21: zero,
            m22: one,
        }
    }

    pub fn apply(&self, fields: FieldPair) -> FieldPair {
        FieldPair {
            right: self.m11 * fields.right + self.m12 * fields.left,
            left: self.m21 * fields.right + self.m22 * fields.left,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m11: self.m11 * s,
            m12: self.m12 * s,
            m21: self.m21 * s,
            m22: self.m22 * s,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.m11
            .norm()
            .max(self.m12.norm())
            .max(self.m21.norm())
            .max(self.m22.norm())
    }

    pub fn is_finite(&self) -> bool {
        [self.m11, self.m12, self.m21, self.m22]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, o: TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * o.m11 + self.m12 * o.m21,
            m12: self.m11 * o.m12 + self.m12 * o.m22,
            m21: self.m21 * o.m11 + self.m22 * o.m21,
            m22: self.m21 * o.m12 + self.m22 * o.m22,
        }
    }
}

/// Single-atom reflection coefficient for a strong, non-depleting control
/// field:
///
/// ```text
/// r = G_eg / ( 2(G_e - i d) + |W|^2 / (2(G_s - i d)) )
/// ```
pub fn reflection_coeff(atom: &AtomParams, drive: &DriveConfig) -> ComplexValue {
    let i = ComplexValue::i();
    let delta = drive.detuning;
    let excited = (ComplexValue::from(atom.gamma_e()) - i * delta) * 2.0;
    let metastable = (ComplexValue::from(atom.gamma_s()) - i * delta) * 2.0;
    let denom = excited + drive.rabi * drive.rabi / metastable;
    atom.gamma_eg() / denom
}

/// Boundary transform of one atom, `1/(1-r) * [[1, -r], [r, 1-2r]]`.
pub fn single_atom_matrix(r: ComplexValue) -> Result<TransferMatrix> {
    let one = ComplexValue::new(1.0, 0.0);
    let t = one - r;
    if t.norm() < SINGULAR_ATOM_GUARD {
        return Err(Error::SingularAtom(t.norm()));
    }
    let s = t.inv();
    Ok(TransferMatrix {
        m11: s,
        m12: -r * s,
        m21: r * s,
        m22: (one - r * 2.0) * s,
    })
}

/// Free propagation over phase `phi`: `diag(e^{-i phi}, e^{i phi})`.
pub fn phase_matrix(phi: f64) -> TransferMatrix {
    let zero = ComplexValue::new(0.0, 0.0);
    TransferMatrix {
        m11: ComplexValue::from_polar(1.0, -phi),
        m12: zero,
        m21: zero,
        m22: ComplexValue::from_polar(1.0, phi),
    }
}

/// Free propagation between neighbouring atoms at signal frequency `omega_s`.
pub fn propagation_matrix(geom: &ArrayGeometry, omega_s: f64) -> TransferMatrix {
    phase_matrix(geom.phase(omega_s))
}

/// Chain product for identical atoms separated by arbitrary gap phases;
/// `gap_phases.len() + 1` atoms in total.
pub fn chain_product(r: ComplexValue, gap_phases: &[f64]) -> Result<TransferMatrix> {
    let atom = single_atom_matrix(r)?;
    Ok(gap_phases
        .iter()
        .fold(atom, |acc, &phi| acc * phase_matrix(phi) * atom))
}

/// Periodic chain product `M_atom * (P * M_atom)^(n-1)`.
pub fn chain_product_periodic(r: ComplexValue, phi: f64, n: usize) -> Result<TransferMatrix> {
    let atom = single_atom_matrix(r)?;
    let cell = phase_matrix(phi) * atom;
    Ok((1..n).fold(atom, |acc, _| acc * cell))
}

/// Array response by brute-force chain product, with the propagation phase
/// evaluated at `omega_s = omega_eg + delta`.
pub fn chain_response(
    atom: &AtomParams,
    drive: &DriveConfig,
    geom: &ArrayGeometry,
) -> Result<TransferMatrix> {
    let r = reflection_coeff(atom, drive);
    let phi = geom.phase(atom.omega_eg() + drive.detuning);
    chain_product_periodic(r, phi, geom.n())
}

/// `ln |M11|` of the periodic chain, accumulated with per-step
/// renormalisation so it stays finite where `M11` itself would overflow.
pub fn log_abs_m11(r: ComplexValue, phi: f64, n: usize) -> Result<f64> {
    let atom = single_atom_matrix(r)?;
    let cell = phase_matrix(phi) * atom;
    let mut acc = atom;
    let mut log_scale = 0.0;
    for _ in 1..n {
        acc = acc * cell;
        let s = acc.max_norm();
        if !(1e-100..=1e100).contains(&s) {
            acc = acc.scale(1.0 / s);
            log_scale += s.ln();
        }
    }
    let m11 = acc.m11.norm();
    if m11 == 0.0 || !m11.is_finite() {
        return Err(Error::OpaqueMedium);
    }
    Ok(log_scale + m11.ln())
}

/// Sign choice for the square root `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Principal,
    Flipped,
}

/// Ingredients `A+`, `A-` and `B` of the closed-form response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormParts {
    pub a_plus: ComplexValue,
    pub a_minus: ComplexValue,
    pub b: ComplexValue,
}

impl ClosedFormParts {
    pub fn new(r: ComplexValue, phi: f64, branch: Branch) -> Self {
        let one = ComplexValue::new(1.0, 0.0);
        let e2 = ComplexValue::from_polar(1.0, 2.0 * phi);
        let u = e2 * (one - r * 2.0);
        let b = ((e2 - one) * (u * (one - r * 2.0) - one)).sqrt();
        let b = match branch {
            Branch::Principal => b,
            Branch::Flipped => -b,
        };
        Self {
            a_plus: u - one,
            a_minus: -u - one,
            b,
        }
    }
}

/// Closed-form `M11` of the periodic array,
///
/// ```text
/// M11 = [(A+ + B)(A- + B)^n - (A+ - B)(A- - B)^n] / [2^(n+1) e^{i(n-1)phi} B (r-1)^n]
/// ```
///
/// evaluated as `[(A+ + B) q+^n - (A+ - B) q-^n] / (2 e^{i(n-1)phi} B)` with
/// `q± = (A- ± B) / (2(r-1))` so large `n` does not overflow.
pub fn closed_form_m11(r: ComplexValue, phi: f64, n: usize) -> Result<ComplexValue> {
    closed_form_m11_with_branch(r, phi, n, Branch::Principal)
}

pub fn closed_form_m11_with_branch(
    r: ComplexValue,
    phi: f64,
    n: usize,
    branch: Branch,
) -> Result<ComplexValue> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "array needs at least one atom".into(),
        ));
    }
    let one = ComplexValue::new(1.0, 0.0);
    if (one - r).norm() < SINGULAR_ATOM_GUARD {
        return Err(Error::SingularAtom((one - r).norm()));
    }
    let ClosedFormParts { a_plus, a_minus, b } = ClosedFormParts::new(r, phi, branch);
    if b.norm() < DEGENERATE_B_GUARD {
        return Err(Error::DegenerateB(b.norm()));
    }
    let denom = (r - one) * 2.0;
    let q_plus = (a_minus + b) / denom;
    let q_minus = (a_minus - b) / denom;
    let exponent =
        u32::try_from(n).map_err(|_| Error::InvalidParameter(format!("n = {n} too large")))?;
    let num = (a_plus + b) * q_plus.powu(exponent) - (a_plus - b) * q_minus.powu(exponent);
    let phase = ComplexValue::from_polar(1.0, (n as f64 - 1.0) * phi);
    Ok(num / (phase * b * 2.0))
}

/// `M11` by closed form, falling back to the chain product when the closed
/// form is degenerate (half-wave spacing, zero spacing).
pub fn array_m11(r: ComplexValue, phi: f64, n: usize) -> Result<ComplexValue> {
    match closed_form_m11(r, phi, n) {
        Ok(m) if m.re.is_finite() && m.im.is_finite() => Ok(m),
        Ok(_) | Err(Error::DegenerateB(_)) => Ok(chain_product_periodic(r, phi, n)?.m11),
        Err(e) => Err(e),
    }
}

/// Array transmission `|1/M11|^2` at the drive's detuning.
pub fn transmission(atom: &AtomParams, drive: &DriveConfig, geom: &ArrayGeometry) -> Result<f64> {
    let r = reflection_coeff(atom, drive);
    let phi = geom.phase(atom.omega_eg() + drive.detuning);
    Ok(array_m11(r, phi, geom.n())?.inv().norm_sqr())
}

/// Whether inter-atom multiple scattering is included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatteringModel {
    /// Full transfer-matrix response.
    #[default]
    Full,
    /// Independent atoms: amplitude `(1-r)^n e^{i(n-1)phi}` and
    /// transmission `exp(-2 n Re r)`.
    ScatteringFree,
}

impl ScatteringModel {
    /// Transmitted amplitude `1/M11` at detuning `delta`.
    pub fn amplitude(
        self,
        atom: &AtomParams,
        rabi: f64,
        geom: &ArrayGeometry,
        delta: f64,
    ) -> Result<ComplexValue> {
        let drive = DriveConfig {
            rabi,
            detuning: delta,
        };
        let r = reflection_coeff(atom, &drive);
        let phi = geom.phase(atom.omega_eg() + delta);
        match self {
            ScatteringModel::Full => Ok(array_m11(r, phi, geom.n())?.inv()),
            ScatteringModel::ScatteringFree => {
                let one = ComplexValue::new(1.0, 0.0);
                let n = geom.n() as u32;
                Ok(
                    (one - r).powu(n)
                        * ComplexValue::from_polar(1.0, (geom.n() as f64 - 1.0) * phi),
                )
            }
        }
    }

    /// `ln T` at detuning `delta`; finite even when `T` underflows.
    pub fn ln_transmission(
        self,
        atom: &AtomParams,
        rabi: f64,
        geom: &ArrayGeometry,
        delta: f64,
    ) -> Result<f64> {
        let drive = DriveConfig {
            rabi,
            detuning: delta,
        };
        let r = reflection_coeff(atom, &drive);
        match self {
            ScatteringModel::Full => {
                let phi = geom.phase(atom.omega_eg() + delta);
                let m = array_m11(r, phi, geom.n())?;
                let t = m.inv().norm_sqr();
                if t > 1e-280 && t.is_finite() {
                    Ok(t.ln())
                } else {
                    Ok(-2.0 * log_abs_m11(r, phi, geom.n())?)
                }
            }
            ScatteringModel::ScatteringFree => Ok(-2.0 * geom.n() as f64 * r.re),
        }
    }
}
