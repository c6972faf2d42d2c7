//! Run configuration: flat `key = value` lines (TOML syntax). Unknown keys
//! are rejected and every omitted key takes its default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ovalwig_core::helmholtz::{EigenSettings, Parity};
use ovalwig_core::sweep::SweepConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Even,
    Odd,
}

impl From<Sector> for Parity {
    fn from(s: Sector) -> Parity {
        match s {
            Sector::Even => Parity::Even,
            Sector::Odd => Parity::Odd,
        }
    }
}

impl From<Parity> for Sector {
    fn from(p: Parity) -> Sector {
        match p {
            Parity::Even => Sector::Even,
            Parity::Odd => Sector::Odd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub h: f64,
    pub parity: Sector,
    pub mode_count: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub wigner_stride: usize,
    pub momentum_points: usize,
    pub momentum_factor: f64,
    pub slice_points: usize,
    pub slice_momenta: usize,
    pub tau: f64,
    pub max_halvings: usize,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub eigen_guard: usize,
    pub eigen_seed: u64,
    pub freeze_shape: bool,
    pub output_dir: PathBuf,
    /// write mode, field and slice dumps at the labelled sample points
    pub dump_points: bool,
    pub log_level: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            a: s.a,
            b: s.b,
            theta_min: s.theta_min,
            theta_max: s.theta_max,
            samples: s.samples,
            delta: s.delta,
            h: s.h,
            parity: s.parity.into(),
            mode_count: s.mode_count,
            k_min: s.k_window.0,
            k_max: s.k_window.1,
            wigner_stride: s.wigner_stride,
            momentum_points: s.momentum_points,
            momentum_factor: s.momentum_factor,
            slice_points: s.slice_points,
            slice_momenta: s.slice_momenta,
            tau: s.tau,
            max_halvings: s.max_halvings,
            eigen_tol: s.eigen.tol,
            eigen_max_iter: s.eigen.max_iter,
            eigen_guard: s.eigen.guard,
            eigen_seed: s.eigen.seed,
            freeze_shape: s.freeze_shape,
            output_dir: PathBuf::from("out"),
            dump_points: false,
            log_level: "info".into(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.level()?;
        self.sweep().validate()?;
        Ok(())
    }

    pub fn level(&self) -> Result<log::LevelFilter> {
        log::LevelFilter::from_str(&self.log_level)
            .map_err(|_| Error::Config(format!("unknown log_level {:?}", self.log_level)))
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            a: self.a,
            b: self.b,
            theta_min: self.theta_min,
            theta_max: self.theta_max,
            samples: self.samples,
            delta: self.delta,
            h: self.h,
            parity: self.parity.into(),
            mode_count: self.mode_count,
            k_window: (self.k_min, self.k_max),
            wigner_stride: self.wigner_stride,
            momentum_points: self.momentum_points,
            momentum_factor: self.momentum_factor,
            slice_points: self.slice_points,
            slice_momenta: self.slice_momenta,
            tau: self.tau,
            max_halvings: self.max_halvings,
            eigen: EigenSettings {
                tol: self.eigen_tol,
                max_iter: self.eigen_max_iter,
                guard: self.eigen_guard,
                seed: self.eigen_seed,
            },
            freeze_shape: self.freeze_shape,
        }
    }

    /// Copy with every implicit default made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.delta = Some(self.sweep().fisher_step());
        out
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("thta_min = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("thta_min"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("delta = 0.5\n").is_err());
        assert!(RunConfig::parse("theta_max = 0.9\n").is_err());
        assert!(RunConfig::parse("log_level = \"loud\"\n").is_err());
        assert!(RunConfig::parse("parity = \"both\"\n").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut c = RunConfig::default().resolved();
        c.h = 1.0 / 3.0;
        c.tau = 0.1 + 0.2;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
