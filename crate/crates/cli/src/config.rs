//! Experiment configuration: a flat `key = value` text format.
//!
//! Values are layered as defaults < preset < file < command-line flags.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cqs_core::floquet::DriveConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Kicked,
    Ac,
}

impl FromStr for Model {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "kicked" => Ok(Model::Kicked),
            "ac" => Ok(Model::Ac),
            _ => Err(ConfigError(format!("model must be `kicked` or `ac`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Kicked => "kicked",
            Model::Ac => "ac",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub j: f64,
    pub ht: f64,
    pub k: f64,
    pub gt: f64,
    pub omega_t: f64,
    /// Histogram bins of the exact density.
    pub bins: usize,
    /// Cells of the trace-sum and semiclassical densities.
    pub cells: usize,
    /// Highest trace order in the Fourier sum.
    pub n_max: usize,
    /// Gaussian damping of the Fourier sum.
    pub damping: f64,
    /// Smoothing width used by the agreement report.
    pub sigma: f64,
    /// Split steps of the ac propagator.
    pub steps: usize,
    /// Periods `L` of the time average.
    pub periods: usize,
    /// Seed grid of the critical-point finder.
    pub grid: usize,
    /// Raster used for contour extraction.
    pub contour_raster: usize,
    /// Raster of the exported landscape.
    pub landscape_raster: usize,
    /// Initial conditions per protocol branch.
    pub points: usize,
    /// Energy bins of the magnetization envelope.
    pub cusp_bins: usize,
    /// Apply the quantum kernel to the semiclassical density.
    pub kernel: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::Kicked,
            j: 100.0,
            ht: 0.1,
            k: 0.3,
            gt: 20.0,
            omega_t: TAU,
            bins: 60,
            cells: 1024,
            n_max: 4000,
            damping: 0.0,
            sigma: 0.1,
            steps: 4000,
            periods: 1000,
            grid: 200,
            contour_raster: 400,
            landscape_raster: 201,
            points: 10,
            cusp_bins: 80,
            kernel: false,
            out: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "j",
    "ht",
    "k",
    "gt",
    "omega_t",
    "bins",
    "cells",
    "n_max",
    "damping",
    "sigma",
    "steps",
    "periods",
    "grid",
    "contour_raster",
    "landscape_raster",
    "points",
    "cusp_bins",
    "kernel",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError(format!("invalid value `{value}` for `{key}`")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "model" => self.model = value.parse()?,
            "j" => self.j = parse(key, value)?,
            "ht" => self.ht = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "gt" => self.gt = parse(key, value)?,
            "omega_t" => self.omega_t = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "cells" => self.cells = parse(key, value)?,
            "n_max" => self.n_max = parse(key, value)?,
            "damping" => self.damping = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "periods" => self.periods = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "contour_raster" => self.contour_raster = parse(key, value)?,
            "landscape_raster" => self.landscape_raster = parse(key, value)?,
            "points" => self.points = parse(key, value)?,
            "cusp_bins" => self.cusp_bins = parse(key, value)?,
            "kernel" => self.kernel = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "model" => self.model.to_string(),
            "j" => self.j.to_string(),
            "ht" => self.ht.to_string(),
            "k" => self.k.to_string(),
            "gt" => self.gt.to_string(),
            "omega_t" => self.omega_t.to_string(),
            "bins" => self.bins.to_string(),
            "cells" => self.cells.to_string(),
            "n_max" => self.n_max.to_string(),
            "damping" => self.damping.to_string(),
            "sigma" => self.sigma.to_string(),
            "steps" => self.steps.to_string(),
            "periods" => self.periods.to_string(),
            "grid" => self.grid.to_string(),
            "contour_raster" => self.contour_raster.to_string(),
            "landscape_raster" => self.landscape_raster.to_string(),
            "points" => self.points.to_string(),
            "cusp_bins" => self.cusp_bins.to_string(),
            "kernel" => self.kernel.to_string(),
            "out" => self.out.to_str()?.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default())).collect()
    }

    pub fn preset(name: &str) -> Result<BTreeMap<&'static str, String>, ConfigError> {
        let (model, j) = match name {
            "fig2a" => ("kicked", "100"),
            "fig2b" => ("ac", "100"),
            "fig3a" => ("kicked", "50"),
            "fig3b" => ("ac", "50"),
            _ => return Err(ConfigError(format!("unknown preset `{name}` (fig2a, fig2b, fig3a, fig3b)"))),
        };
        let mut m = BTreeMap::new();
        m.insert("model", model.to_string());
        m.insert("j", j.to_string());
        m.insert("ht", "0.1".into());
        m.insert("omega_t", TAU.to_string());
        if model == "kicked" {
            m.insert("k", "0.3".into());
        } else {
            m.insert("gt", "20".into());
        }
        Ok(m)
    }

    /// Defaults overlaid with a preset.
    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in Self::preset(name)? {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let two_j = 2.0 * self.j;
        if !(self.j > 0.0 && two_j.fract() == 0.0 && two_j <= 10_000.0) {
            return Err(ConfigError(format!("j must be a positive multiple of 1/2, got {}", self.j)));
        }
        for (name, v) in [("ht", self.ht), ("k", self.k), ("gt", self.gt), ("damping", self.damping)] {
            if !v.is_finite() {
                return Err(ConfigError(format!("{name} must be finite")));
            }
        }
        if !(self.omega_t > 0.0 && self.omega_t.is_finite()) {
            return Err(ConfigError("omega_t must be positive".into()));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 || self.damping < 0.0 {
            return Err(ConfigError("sigma must be positive and damping non-negative".into()));
        }
        for (name, v, min) in [
            ("bins", self.bins, 1),
            ("cells", self.cells, 8),
            ("n_max", self.n_max, 1),
            ("steps", self.steps, 1),
            ("grid", self.grid, 3),
            ("contour_raster", self.contour_raster, 8),
            ("landscape_raster", self.landscape_raster, 2),
            ("cusp_bins", self.cusp_bins, 3),
        ] {
            if v < min {
                return Err(ConfigError(format!("{name} must be at least {min}")));
            }
        }
        Ok(())
    }

    pub fn drive(&self) -> DriveConfig {
        match self.model {
            Model::Kicked => DriveConfig { omega_t: self.omega_t, ..DriveConfig::kicked(self.ht, self.k) },
            Model::Ac => DriveConfig::ac(self.ht, self.gt, self.omega_t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_text("j = 10\nfoo = 1\n").unwrap_err();
        assert!(e.0.contains("unknown key `foo`"), "{e}");
        assert!(ExperimentConfig::from_text("j 10").is_err());
        assert!(ExperimentConfig::from_text("bins = -3").is_err());
    }

    #[test]
    fn comments_and_whitespace() {
        let c = ExperimentConfig::from_text("# test\n\n  model=ac \n gt = 12.5\n").unwrap();
        assert_eq!(c.model, Model::Ac);
        assert_eq!(c.gt, 12.5);
    }

    #[test]
    fn presets() {
        for (name, model, j) in [
            ("fig2a", Model::Kicked, 100.0),
            ("fig2b", Model::Ac, 100.0),
            ("fig3a", Model::Kicked, 50.0),
            ("fig3b", Model::Ac, 50.0),
        ] {
            let mut c = ExperimentConfig::default();
            for (k, v) in ExperimentConfig::preset(name).unwrap() {
                c.set(k, &v).unwrap();
            }
            assert_eq!((c.model, c.j, c.ht, c.omega_t), (model, j, 0.1, TAU));
        }
        assert!(ExperimentConfig::preset("fig4").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig { j: 2.25, ..Default::default() };
        assert!(c.validate().is_err());
        c.j = 2.5;
        assert!(c.validate().is_ok());
        c.sigma = 0.0;
        assert!(c.validate().is_err());
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            (any::<bool>(), 1u32..400, -10.0f64..10.0, -1e3f64..1e3, any::<f64>(), 1e-3f64..1e3),
            (1usize..1000, 8usize..5000, any::<u32>(), 0.0f64..5.0, 1e-4f64..1.0, 1usize..100_000),
            (0usize..10_000, 3usize..500, 8usize..1000, 2usize..500, 0usize..100, 3usize..300),
            (any::<bool>(), "[a-z0-9_/]{1,12}"),
        )
            .prop_map(|(a, b, c, d)| ExperimentConfig {
                model: if a.0 { Model::Kicked } else { Model::Ac },
                j: a.1 as f64 / 2.0,
                ht: a.2,
                k: a.3,
                gt: if a.4.is_finite() { a.4 } else { 0.0 },
                omega_t: a.5,
                bins: b.0,
                cells: b.1,
                n_max: b.2 as usize,
                damping: b.3,
                sigma: b.4,
                steps: b.5,
                periods: c.0,
                grid: c.1,
                contour_raster: c.2,
                landscape_raster: c.3,
                points: c.4,
                cusp_bins: c.5,
                kernel: d.0,
                out: PathBuf::from(d.1),
            })
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(c in arb_config()) {
            let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
