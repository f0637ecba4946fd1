//! Flat `key = value` configuration with dotted keys and strict key checking.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use intermix_core::torus_map::Family;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("duplicate config key `{0}`")]
    Duplicate(String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("cannot read config {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateShape {
    Square,
    Curved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub map_family: Family,
    pub map_c: i64,
    pub gate_shape: GateShape,
    pub gate_delta: f64,
    pub gate_step: f64,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub output_dir: PathBuf,

    pub verify_samples: u64,
    pub verify_cone_samples: u64,
    pub verify_cone_scales: Vec<f64>,
    pub verify_drift_deltas: Vec<f64>,

    pub manifold_x0: Vec<f64>,
    pub manifold_n_max: u64,
    pub manifold_tol: f64,
    pub manifold_width: f64,
    pub manifold_step: f64,

    pub tail_n_max: u64,
    pub tail_depth_max: u32,
    pub tail_deep_n: u64,
    pub tail_far_depth: u32,
    pub tail_cell_cap: u64,
    pub tail_plain: bool,
    pub tail_mc_samples: u64,
    pub tail_fit: [f64; 2],

    pub passage_m: f64,
    /// Extra thresholds for the sensitivity sweep.
    pub passage_m_sweep: Vec<f64>,
    pub passage_strata: u32,
    pub passage_per_stratum: u32,
    pub passage_energy: [f64; 2],
    pub passage_n_max: u64,
    pub passage_fit: [f64; 2],

    pub cells_k: [u64; 2],
    pub cells_per_octave: u32,

    pub corr_samples: u64,
    pub corr_lags: Vec<u64>,
    pub corr_center: [f64; 2],
    pub corr_radius: f64,
    pub corr_fit: [f64; 2],
    pub corr_sigmas: f64,
    pub corr_tol: f64,
    pub corr_tail: Option<PathBuf>,
}

impl Default for LabConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            map_family: Family::BuiltinSine,
            map_c: 24,
            gate_shape: GateShape::Square,
            gate_delta: 0.3,
            gate_step: 0.005,
            seeds: vec![1],
            workers: 0,
            output_dir: PathBuf::from("out"),
            verify_samples: 100_000,
            verify_cone_samples: 10_000,
            verify_cone_scales: vec![0.25, 0.125],
            verify_drift_deltas: vec![0.2, 0.1, 0.05, 0.025],
            manifold_x0: vec![0.05, 0.1, 0.2],
            manifold_n_max: 10_000,
            manifold_tol: 2e-14,
            manifold_width: 0.2,
            manifold_step: 0.005,
            tail_n_max: 4096,
            tail_depth_max: 8,
            tail_deep_n: 1024,
            tail_far_depth: 3,
            tail_cell_cap: 200_000_000,
            tail_plain: false,
            tail_mc_samples: 0,
            tail_fit: [32.0, 1024.0],
            passage_m: 32.0,
            passage_m_sweep: vec![8.0, 128.0],
            passage_strata: 10,
            passage_per_stratum: 40,
            passage_energy: [1e-12, 1e-2],
            passage_n_max: 10_000_000,
            passage_fit: [1e-12, 1e-4],
            cells_k: [16, 256],
            cells_per_octave: 2,
            corr_samples: 100_000_000,
            corr_lags: (0..=30).collect(),
            corr_center: [pi - 0.5, pi - 0.5],
            corr_radius: 0.5,
            corr_fit: [50.0, 1000.0],
            corr_sigmas: 5.0,
            corr_tol: 0.5,
            corr_tail: None,
        }
    }
}

/// Every accepted key, in the order used by [`LabConfig::to_text`].
pub const KEYS: &[&str] = &[
    "map.family",
    "map.c",
    "gate.shape",
    "gate.delta",
    "gate.step",
    "run.seeds",
    "workers",
    "output.dir",
    "verify.samples",
    "verify.cone_samples",
    "verify.cone_scales",
    "verify.drift_deltas",
    "manifold.x0",
    "manifold.n_max",
    "manifold.tol",
    "manifold.width",
    "manifold.step",
    "tail.n_max",
    "tail.depth_max",
    "tail.deep_n",
    "tail.far_depth",
    "tail.cell_cap",
    "tail.scheme",
    "tail.mc_samples",
    "tail.fit_lo",
    "tail.fit_hi",
    "passage.m",
    "passage.m_sweep",
    "passage.strata",
    "passage.per_stratum",
    "passage.e_lo",
    "passage.e_hi",
    "passage.n_max",
    "passage.fit_lo",
    "passage.fit_hi",
    "cells.k_min",
    "cells.k_max",
    "cells.per_octave",
    "corr.samples",
    "corr.lags",
    "corr.center_x",
    "corr.center_y",
    "corr.radius",
    "corr.fit_lo",
    "corr.fit_hi",
    "corr.sigmas",
    "corr.tol",
    "corr.tail",
];

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, v, e.to_string()))
}

/// Integers also accept scientific notation such as `1e8`.
fn int(key: &str, v: &str) -> Result<u64, ConfigError> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    let f: f64 = num(key, v)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= 2f64.powi(53) {
        Ok(f as u64)
    } else {
        Err(bad(key, v, "expected a non-negative integer"))
    }
}

fn list<T>(key: &str, v: &str, one: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    let out: Result<Vec<T>, _> = v.split(',').map(|s| one(key, s.trim())).collect();
    let out = out?;
    if out.is_empty() {
        return Err(bad(key, v, "empty list"));
    }
    Ok(out)
}

/// `a..b` (inclusive) or a comma list.
fn lags(key: &str, v: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b) = (int(key, a.trim())?, int(key, b.trim())?);
        if b < a {
            return Err(bad(key, v, "empty range"));
        }
        return Ok((a..=b).collect());
    }
    list(key, v, int)
}

trait Echo {
    fn echo(&self) -> String;
}

impl Echo for u64 {
    fn echo(&self) -> String {
        self.to_string()
    }
}

impl Echo for f64 {
    fn echo(&self) -> String {
        if *self != 0.0 && (self.abs() < 1e-4 || self.abs() >= 1e15) {
            format!("{self:e}")
        } else {
            self.to_string()
        }
    }
}

fn join<T: Echo>(xs: &[T]) -> String {
    xs.iter().map(Echo::echo).collect::<Vec<_>>().join(",")
}

impl LabConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "map.family" => {
                self.map_family = match v {
                    "builtin_sine" => Family::BuiltinSine,
                    _ => return Err(bad(key, v, "only builtin_sine is available")),
                }
            }
            "map.c" => self.map_c = num(key, v)?,
            "gate.shape" => {
                self.gate_shape = match v {
                    "square" => GateShape::Square,
                    "curved" => GateShape::Curved,
                    _ => return Err(bad(key, v, "expected square or curved")),
                }
            }
            "gate.delta" => self.gate_delta = num(key, v)?,
            "gate.step" => self.gate_step = num(key, v)?,
            "run.seeds" => self.seeds = list(key, v, int)?,
            "workers" => self.workers = int(key, v)? as usize,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "verify.samples" => self.verify_samples = int(key, v)?,
            "verify.cone_samples" => self.verify_cone_samples = int(key, v)?,
            "verify.cone_scales" => self.verify_cone_scales = list(key, v, num)?,
            "verify.drift_deltas" => self.verify_drift_deltas = list(key, v, num)?,
            "manifold.x0" => self.manifold_x0 = list(key, v, num)?,
            "manifold.n_max" => self.manifold_n_max = int(key, v)?,
            "manifold.tol" => self.manifold_tol = num(key, v)?,
            "manifold.width" => self.manifold_width = num(key, v)?,
            "manifold.step" => self.manifold_step = num(key, v)?,
            "tail.n_max" => self.tail_n_max = int(key, v)?,
            "tail.depth_max" => self.tail_depth_max = num(key, v)?,
            "tail.deep_n" => self.tail_deep_n = int(key, v)?,
            "tail.far_depth" => self.tail_far_depth = num(key, v)?,
            "tail.cell_cap" => self.tail_cell_cap = int(key, v)?,
            "tail.scheme" => {
                self.tail_plain = match v {
                    "chart" => false,
                    "plain" => true,
                    _ => return Err(bad(key, v, "expected chart or plain")),
                }
            }
            "tail.mc_samples" => self.tail_mc_samples = int(key, v)?,
            "tail.fit_lo" => self.tail_fit[0] = num(key, v)?,
            "tail.fit_hi" => self.tail_fit[1] = num(key, v)?,
            "passage.m" => self.passage_m = num(key, v)?,
            "passage.m_sweep" => self.passage_m_sweep = list(key, v, num)?,
            "passage.strata" => self.passage_strata = num(key, v)?,
            "passage.per_stratum" => self.passage_per_stratum = num(key, v)?,
            "passage.e_lo" => self.passage_energy[0] = num(key, v)?,
            "passage.e_hi" => self.passage_energy[1] = num(key, v)?,
            "passage.n_max" => self.passage_n_max = int(key, v)?,
            "passage.fit_lo" => self.passage_fit[0] = num(key, v)?,
            "passage.fit_hi" => self.passage_fit[1] = num(key, v)?,
            "cells.k_min" => self.cells_k[0] = int(key, v)?,
            "cells.k_max" => self.cells_k[1] = int(key, v)?,
            "cells.per_octave" => self.cells_per_octave = num(key, v)?,
            "corr.samples" => self.corr_samples = int(key, v)?,
            "corr.lags" => self.corr_lags = lags(key, v)?,
            "corr.center_x" => self.corr_center[0] = num(key, v)?,
            "corr.center_y" => self.corr_center[1] = num(key, v)?,
            "corr.radius" => self.corr_radius = num(key, v)?,
            "corr.fit_lo" => self.corr_fit[0] = num(key, v)?,
            "corr.fit_hi" => self.corr_fit[1] = num(key, v)?,
            "corr.sigmas" => self.corr_sigmas = num(key, v)?,
            "corr.tol" => self.corr_tol = num(key, v)?,
            "corr.tail" => self.corr_tail = Some(PathBuf::from(v)),
            _ => return Err(ConfigError::UnknownKey { key: key.into(), line: 0 }),
        }
        Ok(())
    }

    /// Apply `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), ()).is_some() {
                return Err(ConfigError::Duplicate(k.into()));
            }
            self.set(k, v).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { key, line: i + 1 },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    /// Apply a `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: kv.into() })?;
        self.set(k.trim(), v.trim())
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "map.family" => "builtin_sine".to_string(),
            "map.c" => self.map_c.to_string(),
            "gate.shape" => match self.gate_shape {
                GateShape::Square => "square".into(),
                GateShape::Curved => "curved".into(),
            },
            "gate.delta" => self.gate_delta.echo(),
            "gate.step" => self.gate_step.echo(),
            "run.seeds" => join(&self.seeds),
            "workers" => self.workers.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "verify.samples" => self.verify_samples.to_string(),
            "verify.cone_samples" => self.verify_cone_samples.to_string(),
            "verify.cone_scales" => join(&self.verify_cone_scales),
            "verify.drift_deltas" => join(&self.verify_drift_deltas),
            "manifold.x0" => join(&self.manifold_x0),
            "manifold.n_max" => self.manifold_n_max.to_string(),
            "manifold.tol" => self.manifold_tol.echo(),
            "manifold.width" => self.manifold_width.echo(),
            "manifold.step" => self.manifold_step.echo(),
            "tail.n_max" => self.tail_n_max.to_string(),
            "tail.depth_max" => self.tail_depth_max.to_string(),
            "tail.deep_n" => self.tail_deep_n.to_string(),
            "tail.far_depth" => self.tail_far_depth.to_string(),
            "tail.cell_cap" => self.tail_cell_cap.to_string(),
            "tail.scheme" => if self.tail_plain { "plain" } else { "chart" }.into(),
            "tail.mc_samples" => self.tail_mc_samples.to_string(),
            "tail.fit_lo" => self.tail_fit[0].echo(),
            "tail.fit_hi" => self.tail_fit[1].echo(),
            "passage.m" => self.passage_m.echo(),
            "passage.m_sweep" => join(&self.passage_m_sweep),
            "passage.strata" => self.passage_strata.to_string(),
            "passage.per_stratum" => self.passage_per_stratum.to_string(),
            "passage.e_lo" => self.passage_energy[0].echo(),
            "passage.e_hi" => self.passage_energy[1].echo(),
            "passage.n_max" => self.passage_n_max.to_string(),
            "passage.fit_lo" => self.passage_fit[0].echo(),
            "passage.fit_hi" => self.passage_fit[1].echo(),
            "cells.k_min" => self.cells_k[0].to_string(),
            "cells.k_max" => self.cells_k[1].to_string(),
            "cells.per_octave" => self.cells_per_octave.to_string(),
            "corr.samples" => self.corr_samples.to_string(),
            "corr.lags" => join(&self.corr_lags),
            "corr.center_x" => self.corr_center[0].echo(),
            "corr.center_y" => self.corr_center[1].echo(),
            "corr.radius" => self.corr_radius.echo(),
            "corr.fit_lo" => self.corr_fit[0].echo(),
            "corr.fit_hi" => self.corr_fit[1].echo(),
            "corr.sigmas" => self.corr_sigmas.echo(),
            "corr.tol" => self.corr_tol.echo(),
            "corr.tail" => self.corr_tail.as_ref()?.display().to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Config file text that reproduces this config.
    pub fn to_text(&self) -> String {
        KEYS.iter().filter_map(|k| self.get(k).map(|v| format!("{k} = {v}\n"))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = LabConfig::default();
        let mut d = LabConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn every_key_is_settable() {
        let c = LabConfig::default();
        for k in KEYS {
            let mut d = LabConfig::default();
            if let Some(v) = c.get(k) {
                d.set(k, &v).unwrap();
            }
        }
    }

    #[test]
    fn typo_is_rejected() {
        let mut c = LabConfig::default();
        let e = c.apply_text("map.c = 2\ngat.delta = 0.1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                key: "gat.delta".into(),
                line: 2
            }
        );
    }

    #[test]
    fn parsing_details() {
        let mut c = LabConfig::default();
        c.apply_text("# comment\ncorr.samples = 1e6\ncorr.lags = 0..3\nrun.seeds = 4, 5\n")
            .unwrap();
        assert_eq!(c.corr_samples, 1_000_000);
        assert_eq!(c.corr_lags, vec![0, 1, 2, 3]);
        assert_eq!(c.seeds, vec![4, 5]);
        assert!(c.apply_text("map.c = 1\nmap.c = 2").is_err());
        assert!(c.apply_text("tail.n_max = -3").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }
}
