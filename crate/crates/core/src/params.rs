//! Physical parameters of one artificial atom and of the transmission line,
//! plus the fluxonium defaults and unit handling at the human boundary.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How quoted rate magnitudes ("0.167 MHz") become angular rates.
///
/// `Angular` reads them as `x * 1e6 rad/s`; `Ordinary` as `2*pi * x * 1e6 rad/s`.
/// Transition frequencies are always quoted as `omega / 2*pi` and are not
/// affected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateConvention {
    #[default]
    Angular,
    Ordinary,
}

impl RateConvention {
    pub fn factor(self) -> f64 {
        match self {
            RateConvention::Angular => 1.0,
            RateConvention::Ordinary => 2.0 * PI,
        }
    }

    /// Converts a quoted rate in MHz to rad/s.
    pub fn rate_from_mhz(self, mhz: f64) -> f64 {
        mhz * 1e6 * self.factor()
    }

    /// Inverse of [`RateConvention::rate_from_mhz`].
    pub fn rate_to_mhz(self, rad_s: f64) -> f64 {
        rad_s / (1e6 * self.factor())
    }
}

impl fmt::Display for RateConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateConvention::Angular => "angular",
            RateConvention::Ordinary => "ordinary",
        })
    }
}

impl FromStr for RateConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "angular" => Ok(RateConvention::Angular),
            "ordinary" => Ok(RateConvention::Ordinary),
            other => Err(Error::InvalidParameter(format!(
                "rate convention must be 'angular' or 'ordinary', got '{other}'"
            ))),
        }
    }
}

/// Decay rates and transition frequencies of one three-level atom, all in
/// rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    gamma_eg: f64,
    gamma_es: f64,
    gamma_sg: f64,
    omega_eg: f64,
    omega_es: f64,
}

impl AtomParams {
    pub fn new(
        gamma_eg: f64,
        gamma_es: f64,
        gamma_sg: f64,
        omega_eg: f64,
        omega_es: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("gamma_eg", gamma_eg),
            ("gamma_es", gamma_es),
            ("gamma_sg", gamma_sg),
            ("omega_eg", omega_eg),
            ("omega_es", omega_es),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if !(omega_eg > omega_es) {
            return Err(Error::InvalidParameter(format!(
                "omega_eg = {omega_eg:e} must exceed omega_es = {omega_es:e}"
            )));
        }
        Ok(Self {
            gamma_eg,
            gamma_es,
            gamma_sg,
            omega_eg,
            omega_es,
        })
    }

    /// Fluxonium at the long-coherence flux bias under the given rate
    /// convention.
    pub fn fluxonium(convention: RateConvention) -> Self {
        DeviceConfig::default()
            .with_convention(convention)
            .atom()
            .expect("default fluxonium parameters are valid")
    }

    pub fn gamma_eg(&self) -> f64 {
        self.gamma_eg
    }

    pub fn gamma_es(&self) -> f64 {
        self.gamma_es
    }

    pub fn gamma_sg(&self) -> f64 {
        self.gamma_sg
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_eg
    }

    pub fn omega_es(&self) -> f64 {
        self.omega_es
    }

    /// Excited-state coherence decay `(gamma_eg + gamma_es) / 2`.
    pub fn gamma_e(&self) -> f64 {
        0.5 * (self.gamma_eg + self.gamma_es)
    }

    /// Metastable coherence decay `gamma_sg / 2`.
    pub fn gamma_s(&self) -> f64 {
        0.5 * self.gamma_sg
    }

    /// Copy with a different `gamma_eg` (used by limit checks).
    pub fn with_gamma_eg(self, gamma_eg: f64) -> Result<Self> {
        Self::new(
            gamma_eg,
            self.gamma_es,
            self.gamma_sg,
            self.omega_eg,
            self.omega_es,
        )
    }

    /// Copy with a different `gamma_sg`.
    pub fn with_gamma_sg(self, gamma_sg: f64) -> Result<Self> {
        Self::new(
            self.gamma_eg,
            self.gamma_es,
            gamma_sg,
            self.omega_eg,
            self.omega_es,
        )
    }
}

/// Device description in the units quoted for the hardware: MHz rates,
/// GHz transition frequencies, line speed in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub gamma_sg_mhz: f64,
    pub gamma_eg_ratio: f64,
    pub gamma_es_ratio: f64,
    pub omega_eg_ghz: f64,
    pub omega_es_ghz: f64,
    pub line_speed: f64,
    pub rate_convention: RateConvention,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            gamma_sg_mhz: 0.167,
            gamma_eg_ratio: 173.0,
            gamma_es_ratio: 40.0,
            omega_eg_ghz: 10.4,
            omega_es_ghz: 6.99,
            line_speed: 1.2e8,
            rate_convention: RateConvention::Angular,
        }
    }
}

impl DeviceConfig {
    pub fn with_convention(mut self, convention: RateConvention) -> Self {
        self.rate_convention = convention;
        self
    }

    pub fn atom(&self) -> Result<AtomParams> {
        let gamma_sg = self.rate(self.gamma_sg_mhz);
        AtomParams::new(
            self.gamma_eg_ratio * gamma_sg,
            self.gamma_es_ratio * gamma_sg,
            gamma_sg,
            2.0 * PI * self.omega_eg_ghz * 1e9,
            2.0 * PI * self.omega_es_ghz * 1e9,
        )
    }

    /// Quoted MHz rate (Rabi frequency, decay) to rad/s.
    pub fn rate(&self, mhz: f64) -> f64 {
        self.rate_convention.rate_from_mhz(mhz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.line_speed > 0.0 && self.line_speed.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "line speed {} must be positive",
                self.line_speed
            )));
        }
        self.atom().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_rates() {
        let atom = AtomParams::fluxonium(RateConvention::Angular);
        let g = 0.167e6;
        assert!((atom.gamma_eg() - 173.0 * g).abs() < 1e-6);
        assert!((atom.gamma_e() - 0.5 * 213.0 * g).abs() < 1e-6);
        assert!((atom.gamma_s() - 0.5 * g).abs() < 1e-9);
        assert!((atom.omega_eg() - 2.0 * PI * 10.4e9).abs() < 1e-3);
    }

    #[test]
    fn ordinary_convention_scales_rates_only() {
        let a = AtomParams::fluxonium(RateConvention::Angular);
        let o = AtomParams::fluxonium(RateConvention::Ordinary);
        assert!((o.gamma_sg() / a.gamma_sg() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(o.omega_eg(), a.omega_eg());
    }

    #[test]
    fn rejects_non_positive_rates_and_inverted_levels() {
        assert!(AtomParams::new(1.0, 1.0, 0.0, 2.0, 1.0).is_err());
        assert!(AtomParams::new(1.0, 1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn convention_parses() {
        assert_eq!(
            "Ordinary".parse::<RateConvention>().unwrap(),
            RateConvention::Ordinary
        );
        assert!("hertz".parse::<RateConvention>().is_err());
    }
}
