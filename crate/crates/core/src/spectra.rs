//! Transmission spectra over detuning grids, optical depth and its scaling
//! with the number of atoms.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{linear_fit, ComplexValue, LineFit, SampledGrid};
use crate::params::AtomParams;
use crate::scattering::{reflection_coeff, ArrayGeometry, DriveConfig, ScatteringModel};

/// Default half-span of the detuning grid, rad/s.
pub const DEFAULT_SPAN: f64 = 2.0 * PI * 500e6;
/// Default number of detuning samples.
pub const DEFAULT_POINTS: usize = 4096;

/// Uniform detuning grid `delta_k = (k - N/2) * step`, `step = 2*span/N`.
/// Index `N/2` is exactly zero detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningGrid {
    pub span: f64,
    pub points: usize,
}

impl Default for DetuningGrid {
    fn default() -> Self {
        Self {
            span: DEFAULT_SPAN,
            points: DEFAULT_POINTS,
        }
    }
}

impl DetuningGrid {
    pub fn new(span: f64, points: usize) -> Result<Self> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "span {span} must be positive"
            )));
        }
        if points < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 points, got {points}"
            )));
        }
        Ok(Self { span, points })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.span / self.points as f64
    }

    pub fn zero_index(&self) -> usize {
        self.points / 2
    }

    pub fn detunings(&self) -> Vec<f64> {
        let step = self.step();
        let half = self.zero_index() as f64;
        (0..self.points).map(|k| (k as f64 - half) * step).collect()
    }
}

/// Transmitted amplitude `1/M11` sampled over detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    pub grid: SampledGrid,
    pub atom: AtomParams,
    pub rabi: f64,
    pub geometry: ArrayGeometry,
    pub model: ScatteringModel,
}

impl SpectralResponse {
    pub fn detunings(&self) -> &[f64] {
        self.grid.xs()
    }

    pub fn amplitudes(&self) -> &[ComplexValue] {
        self.grid.ys()
    }

    pub fn transmission(&self) -> Vec<f64> {
        self.grid.ys().iter().map(|a| a.norm_sqr()).collect()
    }

    /// Index of the sample closest to zero detuning.
    pub fn zero_index(&self) -> usize {
        self.grid
            .xs()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Whether `T(0)` exceeds both neighbouring samples.
    pub fn peak_at_zero(&self) -> bool {
        let t = self.transmission();
        let i = self.zero_index();
        i > 0 && i + 1 < t.len() && t[i] > t[i - 1] && t[i] > t[i + 1]
    }

    /// Mirror asymmetry of `T` around zero detuning, restricted to
    /// `|delta| <= half_width`.
    pub fn asymmetry(&self, half_width: f64) -> Result<Asymmetry> {
        let step = self.grid.spacing().ok_or(Error::NonUniformGrid)?;
        let t = self.transmission();
        let i0 = self.zero_index();
        if self.grid.xs()[i0] != 0.0 {
            return Err(Error::DegenerateInput(
                "grid does not contain zero detuning".into(),
            ));
        }
        let k_max = ((half_width / step).floor() as usize)
            .min(i0)
            .min(t.len() - 1 - i0);
        let mismatch: f64 = (1..=k_max)
            .map(|k| (t[i0 + k] - t[i0 - k]).abs())
            .sum::<f64>()
            * step;
        let peak_area: f64 = t[i0 - k_max..=i0 + k_max].iter().sum::<f64>() * step;
        Ok(Asymmetry {
            half_width: k_max as f64 * step,
            mismatch,
            peak_area,
            ratio: mismatch / peak_area,
        })
    }

    /// Rows `delta, re, im, T` for CSV output.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.grid
            .points()
            .map(|(d, a)| vec![d, a.re, a.im, a.norm_sqr()])
            .collect()
    }
}

/// Integrated `|T(+d) - T(-d)|` compared with the area under the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymmetry {
    pub half_width: f64,
    pub mismatch: f64,
    pub peak_area: f64,
    pub ratio: f64,
}

/// Samples `1/M11` over the grid. The inter-atom phase is evaluated at the
/// full signal frequency `omega_eg + delta` for every point. Points are
/// independent and evaluated in parallel; the result does not depend on
/// scheduling.
pub fn sweep_transmission(
    atom: &AtomParams,
    grid: &DetuningGrid,
    rabi: f64,
    geom: &ArrayGeometry,
    model: ScatteringModel,
) -> Result<SpectralResponse> {
    let deltas = grid.detunings();
    let amplitudes = deltas
        .par_iter()
        .map(|&d| model.amplitude(atom, rabi, geom, d))
        .collect::<Result<Vec<_>>>()?;
    if amplitudes
        .iter()
        .any(|a| !(a.re.is_finite() && a.im.is_finite()))
    {
        return Err(Error::InvalidRegime("non-finite amplitude in sweep".into()));
    }
    Ok(SpectralResponse {
        grid: SampledGrid::new(deltas, amplitudes)?,
        atom: *atom,
        rabi,
        geometry: *geom,
        model,
    })
}

/// Optical depth `alpha = -ln T`. Computed in the log domain so that large
/// opaque arrays still give a finite value.
pub fn optical_depth(
    atom: &AtomParams,
    geom: &ArrayGeometry,
    rabi: f64,
    delta: f64,
) -> Result<f64> {
    let ln_t = ScatteringModel::Full.ln_transmission(atom, rabi, geom, delta)?;
    if !ln_t.is_finite() {
        return Err(Error::OpaqueMedium);
    }
    Ok(-ln_t)
}

/// Optical depth versus atom count with a least-squares line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthScan {
    pub spacing: f64,
    pub records: Vec<(usize, f64)>,
    pub fit: LineFit,
}

/// `alpha(n)` for `n = 1..=n_max` at zero detuning with the control off.
pub fn beer_scan(
    atom: &AtomParams,
    spacing: f64,
    line_speed: f64,
    n_max: usize,
) -> Result<DepthScan> {
    if n_max < 3 {
        return Err(Error::InvalidParameter(format!(
            "n_max = {n_max} must be at least 3"
        )));
    }
    let records = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let geom = ArrayGeometry::new(n, spacing, line_speed)?;
            Ok((n, optical_depth(atom, &geom, 0.0, 0.0)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = records.iter().map(|&(n, a)| (n as f64, a)).unzip();
    Ok(DepthScan {
        spacing,
        records,
        fit: linear_fit(&xs, &ys)?,
    })
}

/// Limit of the optical depth as the spacing approaches a multiple of half
/// a wavelength: `2 ln((1 + (n-1) r0) / (1 - r0))`.
pub fn half_wave_depth(r0: ComplexValue, n: usize) -> f64 {
    let one = ComplexValue::new(1.0, 0.0);
    let ratio = (one + r0 * (n as f64 - 1.0)) / (one - r0);
    2.0 * ratio.norm().ln()
}

/// Resonant passive reflection coefficient of one atom.
pub fn passive_reflection(atom: &AtomParams) -> ComplexValue {
    reflection_coeff(atom, &DriveConfig::passive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RateConvention;
    use crate::scattering::wavelength;

    const C_LINE: f64 = 1.2e8;

    fn fluxonium() -> AtomParams {
        AtomParams::fluxonium(RateConvention::Angular)
    }

    fn lambda() -> f64 {
        wavelength(fluxonium().omega_eg(), C_LINE)
    }

    #[test]
    fn grid_contains_zero() {
        let g = DetuningGrid::new(10.0, 8).unwrap();
        let d = g.detunings();
        assert_eq!(d[g.zero_index()], 0.0);
        assert_eq!(d.len(), 8);
        assert!((d[1] - d[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn transparent_atoms_have_zero_depth() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(5, 1e-3, C_LINE).unwrap();
        let alpha = optical_depth(&atom, &geom, 1e14, 0.0).unwrap();
        assert!(alpha.abs() < 1e-9);
    }

    #[test]
    fn single_atom_depth_baseline() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(1, lambda() / 4.0, C_LINE).unwrap();
        let alpha = optical_depth(&atom, &geom, 0.0, 0.0).unwrap();
        let expected = -2.0 * (40.0_f64 / 213.0).ln();
        assert!((alpha - expected).abs() < 1e-12);
        assert!((alpha - 3.345).abs() < 1e-3);
    }

    #[test]
    fn depth_doubles_with_atom_count_at_quarter_wave() {
        let atom = fluxonium();
        let g10 = ArrayGeometry::new(10, lambda() / 4.0, C_LINE).unwrap();
        let g20 = g10.with_n(20).unwrap();
        let ratio = optical_depth(&atom, &g20, 0.0, 0.0).unwrap()
            / optical_depth(&atom, &g10, 0.0, 0.0).unwrap();
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn opaque_array_depth_stays_finite() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(400, lambda() / 4.0, C_LINE).unwrap();
        let alpha = optical_depth(&atom, &geom, 0.0, 0.0).unwrap();
        assert!(alpha.is_finite() && alpha > 1500.0);
    }

    #[test]
    fn half_wave_formula_single_atom_and_pair() {
        let r0 = ComplexValue::new(173.0 / 213.0, 0.0);
        assert!((half_wave_depth(r0, 1) - 2.0 * (1.0 / (1.0 - r0.re)).ln()).abs() < 1e-14);
        // 2 ln((1 + r0)/(1 - r0)) with r0 = 173/213 is 2 ln(386/40)
        let expected = 2.0 * (386.0_f64 / 40.0).ln();
        assert!((half_wave_depth(r0, 2) - expected).abs() < 1e-12);
        assert!((half_wave_depth(r0, 2) - 4.53).abs() < 0.01);
    }

    #[test]
    fn passive_spectrum_has_no_window() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(10, 1e-3, C_LINE).unwrap();
        let grid = DetuningGrid::new(2.0 * PI * 50e6, 513).unwrap();
        let s = sweep_transmission(&atom, &grid, 0.0, &geom, ScatteringModel::Full).unwrap();
        assert!(!s.peak_at_zero());
        // interference shifts the absorption minimum slightly off zero, but
        // resonance stays deep inside the absorption line
        let t = s.transmission();
        let i = s.zero_index();
        assert!(t[i] < 1e-12);
        let quarter = geom.with_spacing(lambda() / 4.0).unwrap();
        let s = sweep_transmission(&atom, &grid, 0.0, &quarter, ScatteringModel::Full).unwrap();
        let t = s.transmission();
        assert!(t[i] <= t[i - 1] && t[i] <= t[i + 1]);
    }

    #[test]
    fn driven_spectrum_has_window() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(10, 1e-3, C_LINE).unwrap();
        let grid = DetuningGrid::new(2.0 * PI * 50e6, 512).unwrap();
        let s = sweep_transmission(&atom, &grid, 2e8, &geom, ScatteringModel::Full).unwrap();
        assert!(s.peak_at_zero());
    }

    #[test]
    fn parallel_sweep_matches_pointwise() {
        let atom = fluxonium();
        let geom = ArrayGeometry::new(7, 0.9e-3, C_LINE).unwrap();
        let grid = DetuningGrid::new(1e8, 64).unwrap();
        let s = sweep_transmission(&atom, &grid, 1.5e8, &geom, ScatteringModel::Full).unwrap();
        for (d, a) in s.grid.points() {
            let direct = ScatteringModel::Full
                .amplitude(&atom, 1.5e8, &geom, d)
                .unwrap();
            assert_eq!(a, direct);
        }
    }

    #[test]
    fn beer_scan_needs_three_points() {
        assert!(beer_scan(&fluxonium(), 1e-3, C_LINE, 2).is_err());
    }
}
