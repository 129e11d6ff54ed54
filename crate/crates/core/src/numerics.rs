//! Numerical utilities shared by the physics modules: bracketing root
//! finder, central finite differences, least-squares line fit, a
//! unitary discrete Fourier transform between detuning and time, and
//! trapezoidal energy integrals.
//!
//! Fourier convention. A spectrum sampled at `omega_j = omega_0 + j*d_omega`
//! (`j = 0..N`) maps to a time grid `t_k = (k - N/2) * d_t` with
//! `d_t = 2*pi / (N * d_omega)` and
//!
//! ```text
//! y(t_k) = d_omega / sqrt(2*pi) * sum_j y(omega_j) * exp(-i * omega_j * t_k)
//! ```
//!
//! so that a spectral factor `exp(i * omega * t0)` delays the pulse by `t0`
//! and `sum |y_omega|^2 d_omega == sum |y_t|^2 d_t` exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type ComplexValue = Complex64;

const MAX_ROOT_ITERATIONS: usize = 200;

/// Ordered samples `(x, y)` with an optional uniform-spacing flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    xs: Vec<f64>,
    ys: Vec<ComplexValue>,
    spacing: Option<f64>,
}

impl SampledGrid {
    /// Builds a grid from explicit abscissae, which must be strictly increasing.
    /// Uniform spacing is detected automatically.
    pub fn new(xs: Vec<f64>, ys: Vec<ComplexValue>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DegenerateInput(format!(
                "{} abscissae but {} samples",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateInput(
                "abscissae must be strictly increasing".into(),
            ));
        }
        let spacing = if xs.len() >= 2 {
            let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
            let uniform = xs
                .windows(2)
                .all(|w| ((w[1] - w[0]) - dx).abs() < 1e-12 * dx.abs());
            uniform.then_some(dx)
        } else {
            None
        };
        Ok(Self { xs, ys, spacing })
    }

    /// Uniform grid `x_i = x0 + i*dx`.
    pub fn uniform(x0: f64, dx: f64, ys: Vec<ComplexValue>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "spacing {dx} must be positive"
            )));
        }
        let xs = (0..ys.len()).map(|i| x0 + i as f64 * dx).collect();
        Ok(Self {
            xs,
            ys,
            spacing: Some(dx),
        })
    }

    /// Uniform grid centred on zero: `x_i = (i - N/2) * dx`.
    pub fn centered(dx: f64, ys: Vec<ComplexValue>) -> Result<Self> {
        let half = (ys.len() / 2) as f64;
        Self::uniform(-half * dx, dx, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[ComplexValue] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Spacing if the grid is uniform.
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, ComplexValue)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Same abscissae, new samples.
    pub fn map(&self, mut f: impl FnMut(f64, ComplexValue) -> ComplexValue) -> Self {
        let ys = self.points().map(|(x, y)| f(x, y)).collect();
        Self {
            xs: self.xs.clone(),
            ys,
            spacing: self.spacing,
        }
    }

    /// Extends a uniform grid symmetrically with zero samples to `factor`
    /// times its length. Used to interpolate the time-domain signal.
    pub fn zero_padded(&self, factor: usize) -> Result<Self> {
        let dx = self.spacing.ok_or(Error::NonUniformGrid)?;
        if factor <= 1 {
            return Ok(self.clone());
        }
        let n = self.len();
        let total = n * factor;
        let lead = (total - n) / 2;
        let mut ys = vec![ComplexValue::new(0.0, 0.0); total];
        ys[lead..lead + n].copy_from_slice(&self.ys);
        Self::uniform(self.xs[0] - lead as f64 * dx, dx, ys)
    }
}

/// Brent-class bracketing root finder (inverse quadratic interpolation,
/// secant and bisection steps). Terminates once the bracket is narrower
/// than `tol`; the returned abscissa always lies in `[lo, hi]`.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ROOT_ITERATIONS {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        // |c - b| is the bracket width; floating resolution bounds it below
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b.clamp(lo.min(hi), lo.max(hi)));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    Err(Error::MaxIterations(MAX_ROOT_ITERATIONS))
}

/// Order of a central finite difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// Central finite difference of a complex-valued function, error O(h^2).
pub fn derivative<F>(f: F, x0: f64, order: Order, h: f64) -> ComplexValue
where
    F: Fn(f64) -> ComplexValue,
{
    match order {
        Order::First => (f(x0 + h) - f(x0 - h)) / (2.0 * h),
        Order::Second => (f(x0 + h) - f(x0) * 2.0 + f(x0 - h)) / (h * h),
    }
}

/// Central difference with a step-halving stability check: the step is
/// halved until two successive estimates differ by less than `rel_tol`
/// (relative). Returns the estimate at the finer step.
pub fn derivative_checked<F>(
    f: F,
    x0: f64,
    order: Order,
    h: f64,
    rel_tol: f64,
) -> Result<ComplexValue>
where
    F: Fn(f64) -> ComplexValue,
{
    const MAX_HALVINGS: usize = 12;
    let mut step = h;
    let mut coarse = derivative(&f, x0, order, step);
    for _ in 0..MAX_HALVINGS {
        step *= 0.5;
        let fine = derivative(&f, x0, order, step);
        if !fine.re.is_finite() || !fine.im.is_finite() {
            break;
        }
        let scale = coarse.norm().max(fine.norm());
        if (fine - coarse).norm() <= rel_tol * scale {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::UnstableDerivative(format!(
        "no {rel_tol:e}-stable estimate at x0 = {x0:e} starting from h = {h:e}"
    )))
}

/// Result of an ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least two paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all x values are equal".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

fn check_fft_grid(grid: &SampledGrid) -> Result<f64> {
    let dx = grid.spacing().ok_or(Error::NonUniformGrid)?;
    if !grid.len().is_power_of_two() {
        return Err(Error::NonPowerOfTwo(grid.len()));
    }
    Ok(dx)
}

fn alternating(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Inverse transform from an angular-frequency grid to a time grid centred
/// on `t = 0` (see the module docs for the convention).
pub fn spectrum_to_time(spec: &SampledGrid) -> Result<SampledGrid> {
    let d_omega = check_fft_grid(spec)?;
    let n = spec.len();
    let d_t = 2.0 * PI / (n as f64 * d_omega);
    let omega0 = spec.xs()[0];

    let mut buf: Vec<ComplexValue> = spec
        .ys()
        .iter()
        .enumerate()
        .map(|(j, y)| y * alternating(j))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let norm = d_omega / (2.0 * PI).sqrt();
    let half = (n / 2) as f64;
    let ys = buf
        .into_iter()
        .enumerate()
        .map(|(k, y)| {
            let t = (k as f64 - half) * d_t;
            y * ComplexValue::from_polar(norm, -omega0 * t)
        })
        .collect();
    SampledGrid::centered(d_t, ys)
}

/// Forward transform from a time grid to an angular-frequency grid centred
/// on `omega = 0`; the inverse of [`spectrum_to_time`].
pub fn time_to_spectrum(signal: &SampledGrid) -> Result<SampledGrid> {
    let d_t = check_fft_grid(signal)?;
    let n = signal.len();
    let d_omega = 2.0 * PI / (n as f64 * d_t);
    let t0 = signal.xs()[0];

    let mut buf: Vec<ComplexValue> = signal
        .ys()
        .iter()
        .enumerate()
        .map(|(k, y)| y * alternating(k))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

    let norm = d_t / (2.0 * PI).sqrt();
    let half = (n / 2) as f64;
    let ys = buf
        .into_iter()
        .enumerate()
        .map(|(j, y)| {
            let omega = (j as f64 - half) * d_omega;
            y * ComplexValue::from_polar(norm, omega * t0)
        })
        .collect();
    SampledGrid::centered(d_omega, ys)
}

/// Trapezoidal integral of `|y|^2` over the grid.
pub fn integrate(grid: &SampledGrid) -> f64 {
    grid.xs()
        .windows(2)
        .zip(grid.ys().windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0].norm_sqr() + y[1].norm_sqr()))
        .sum()
}

/// Rectangle-rule energy `sum |y|^2 * dx` of a uniform grid. This is the
/// quantity conserved exactly by the discrete transforms.
pub fn discrete_energy(grid: &SampledGrid) -> Result<f64> {
    let dx = grid.spacing().ok_or(Error::NonUniformGrid)?;
    Ok(grid.ys().iter().map(|y| y.norm_sqr()).sum::<f64>() * dx)
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> ComplexValue {
        ComplexValue::new(re, 0.0)
    }

    #[test]
    fn root_of_linear_function() {
        let x = find_root(|x| x - 2.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn root_of_cosine_is_half_pi() {
        let x = find_root(f64::cos, 1.0, 2.0, 1e-12).unwrap();
        assert!((x - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn root_of_quadratic_matches_sqrt() {
        let x = find_root(|x| x * x - 2.0, 1.0, 2.0, 1e-12).unwrap();
        assert!((x - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn root_requires_sign_change() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn root_with_reversed_bracket() {
        let x = find_root(|x| x - 3.0, 10.0, 0.0, 1e-12).unwrap();
        assert!((x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn first_derivative_of_square() {
        let d = derivative(|x| c(x * x), 3.0, Order::First, 1e-3);
        assert!((d.re - 6.0).abs() < 1e-9);
    }

    #[test]
    fn second_derivative_of_square_at_zero() {
        let d = derivative(|x| c(x * x), 0.0, Order::Second, 0.5);
        assert_eq!(d.re, 2.0);
    }

    #[test]
    fn derivative_of_complex_exponential() {
        let d = derivative(
            |x| ComplexValue::from_polar(1.0, x),
            0.0,
            Order::First,
            1e-4,
        );
        assert!((d - ComplexValue::i()).norm() < 1e-8);
    }

    #[test]
    fn checked_derivative_converges() {
        let d = derivative_checked(|x| c(x.sin()), 0.3, Order::First, 0.1, 1e-3).unwrap();
        assert!((d.re - 0.3_f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn fit_exact_line() {
        let fit = linear_fit(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!(fit.intercept.abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_flat_line() {
        let fit = linear_fit(&[0.0, 1.0], &[5.0, 5.0]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 5.0);
    }

    #[test]
    fn fit_rejects_constant_x() {
        assert!(matches!(
            linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn integrate_constant_and_zero() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let ones = SampledGrid::new(xs.clone(), vec![c(1.0); 11]).unwrap();
        assert!((integrate(&ones) - 1.0).abs() < 1e-14);
        let zeros = SampledGrid::new(xs, vec![c(0.0); 11]).unwrap();
        assert_eq!(integrate(&zeros), 0.0);
    }

    #[test]
    fn integrate_normalised_gaussian() {
        let sigma = 1.7;
        let n = 4096;
        let dx = 16.0 * sigma / (n - 1) as f64;
        let ys = (0..n)
            .map(|i| {
                let x = -8.0 * sigma + i as f64 * dx;
                c((PI * sigma * sigma).powf(-0.25) * (-x * x / (2.0 * sigma * sigma)).exp())
            })
            .collect();
        let grid = SampledGrid::uniform(-8.0 * sigma, dx, ys).unwrap();
        assert!((integrate(&grid) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_spectrum_is_delta_at_zero() {
        let n = 64;
        let grid = SampledGrid::centered(0.5, vec![c(1.0); n]).unwrap();
        let time = spectrum_to_time(&grid).unwrap();
        for (t, y) in time.points() {
            if t == 0.0 {
                assert!(y.norm() > 1.0);
            } else {
                assert!(y.norm() < 1e-12, "t = {t}, |y| = {}", y.norm());
            }
        }
    }

    #[test]
    fn gaussian_spectrum_gives_gaussian_pulse() {
        let sigma_w = 3.0;
        let n = 1024;
        let dw = 20.0 * sigma_w / n as f64;
        let spec: Vec<_> = (0..n)
            .map(|j| {
                let w = (j as f64 - (n / 2) as f64) * dw;
                c((-w * w / (2.0 * sigma_w * sigma_w)).exp())
            })
            .collect();
        let grid = SampledGrid::centered(dw, spec).unwrap();
        let time = spectrum_to_time(&grid).unwrap();
        // analytic pair: exp(-w^2/2s^2) -> s * exp(-s^2 t^2 / 2), i.e. sigma_t = 1/sigma_w
        let peak = sigma_w;
        for (t, y) in time.points().filter(|(t, _)| t.abs() < 2.0) {
            let expected = peak * (-(sigma_w * t).powi(2) / 2.0).exp();
            assert!((y.re - expected).abs() < 1e-9, "t = {t}");
            assert!(y.im.abs() < 1e-9);
        }
    }

    #[test]
    fn linear_phase_shifts_pulse() {
        let n = 1024;
        let dw = 0.05;
        let t0 = 4.0;
        let grid = SampledGrid::centered(
            dw,
            (0..n)
                .map(|j| {
                    let w = (j as f64 - (n / 2) as f64) * dw;
                    ComplexValue::from_polar((-w * w / 2.0).exp(), w * t0)
                })
                .collect(),
        )
        .unwrap();
        let time = spectrum_to_time(&grid).unwrap();
        let (t_peak, _) = time
            .points()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let dt = time.spacing().unwrap();
        assert!((t_peak - t0).abs() <= dt / 2.0 + 1e-12, "peak at {t_peak}");
    }

    #[test]
    fn transform_rejects_bad_grids() {
        let g = SampledGrid::centered(1.0, vec![c(1.0); 12]).unwrap();
        assert_eq!(spectrum_to_time(&g), Err(Error::NonPowerOfTwo(12)));
        let g = SampledGrid::new(vec![0.0, 1.0, 3.0, 4.0], vec![c(1.0); 4]).unwrap();
        assert_eq!(spectrum_to_time(&g), Err(Error::NonUniformGrid));
    }

    #[test]
    fn non_increasing_grid_rejected() {
        assert!(SampledGrid::new(vec![0.0, 0.0], vec![c(1.0); 2]).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3).powi(2) + 2.0, 0.0, 3.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
