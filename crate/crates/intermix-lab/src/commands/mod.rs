//! Subcommand implementations. Each is a pure function of the config and seed.

use std::path::PathBuf;

use anyhow::Result;
use intermix_core::inducing::GateRegion;
use intermix_core::torus_map::MapSpec;
use thiserror::Error;

use crate::config::{GateShape, LabConfig};
use crate::output::{Format, RunSummary, Writer};

pub mod cells;
pub mod corr;
pub mod manifold;
pub mod passage;
pub mod tail;
pub mod verify;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("missing input {path}: {hint}")]
    MissingInput { path: PathBuf, hint: String },
    #[error("unsupported setting: {0}")]
    Unsupported(String),
}

/// Resolved settings shared by all subcommands.
pub struct Ctx {
    pub cfg: LabConfig,
    pub spec: MapSpec,
    pub seed: u64,
    pub format: Format,
}

impl Ctx {
    pub fn new(cfg: LabConfig, format: Format) -> Result<Self> {
        let spec = MapSpec::new(cfg.map_family, cfg.map_c)?;
        Ok(Self {
            seed: cfg.seed(),
            cfg,
            spec,
            format,
        })
    }

    pub fn gate(&self) -> Result<GateRegion> {
        Ok(match self.cfg.gate_shape {
            GateShape::Square => GateRegion::square(self.cfg.gate_delta)?,
            GateShape::Curved => GateRegion::curved(&self.spec, self.cfg.gate_delta, self.cfg.gate_step)?,
        })
    }

    pub fn square_gate(&self, what: &str) -> Result<GateRegion> {
        if self.cfg.gate_shape != GateShape::Square {
            return Err(LabError::Unsupported(format!("{what} needs gate.shape = square")).into());
        }
        self.gate()
    }

    pub fn writer(&self) -> Result<Writer> {
        Writer::new(&self.cfg.output_dir, self.format)
    }

    pub fn summary(&self, command: &str) -> RunSummary {
        RunSummary::new(command, self.seed)
    }

    /// Config echo without the settings that cannot change results.
    pub fn resolved_config(&self) -> String {
        self.cfg
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("workers") && !l.starts_with("output.dir"))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}
