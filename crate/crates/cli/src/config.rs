//! Run configuration.
//!
//! A config is one JSON object. Times are in problem units and lengths in
//! domain units. Example for a fixed-interface run:
//!
//! ```json
//! {
//!   "mode": "fixed",
//!   "seed": 7,
//!   "n": 2,
//!   "geometry": { "kind": "flat_box", "dim": 1, "cells": 64 },
//!   "initial": { "kind": "smooth_random", "amplitude": 0.5 },
//!   "T": 0.1, "N": 16, "lambda": 0.9,
//!   "snapshot_every": 4,
//!   "output_dir": "fixed-1d"
//! }
//! ```
//!
//! `moving` adds `"motion": { "kind": "shrinking_circle", "r0": 0.8 }` or
//! `{ "kind": "prescribed_point1_d", "coeffs": [...] }`. `sphere` replaces
//! `n`, `geometry` and `initial` with a `sphere` block, and `verify` only
//! reads the `verify` block and `seed`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use harmflow::descent::StepConfig;
use harmflow::flow::{FlowConfig, DEFAULT_LAMBDA};
use harmflow::functional::LibrarySpec;
use harmflow::grid::{Geometry, InitialRecipe};
use harmflow::motion::{InterfaceMotion, LIFESPAN_MARGIN};
use harmflow::sphere::SphereRecipe;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fixed,
    Moving,
    Sphere,
    Verify,
}

/// Initial data for matrix runs. Random recipes draw from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    ConstantPair { axis: Vec<f64> },
    SmoothRandom { amplitude: f64 },
    NodalNoise { amplitude: f64 },
    UserFile { path: PathBuf },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::SmoothRandom { amplitude: 0.5 }
    }
}

impl InitialSpec {
    pub fn recipe(&self, seed: u64) -> InitialRecipe {
        match self {
            InitialSpec::ConstantPair { axis } => InitialRecipe::ConstantPair { axis: axis.clone() },
            InitialSpec::SmoothRandom { amplitude } => InitialRecipe::SmoothRandom { seed, amplitude: *amplitude },
            InitialSpec::NodalNoise { amplitude } => InitialRecipe::NodalNoise { seed, amplitude: *amplitude },
            InitialSpec::UserFile { path } => InitialRecipe::UserFile { path: path.clone() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SphereInitial {
    Constant { value: Vec<f64> },
    SmoothRandom { amplitude: f64 },
    NodalNoise { amplitude: f64 },
}

impl SphereInitial {
    pub fn recipe(&self, seed: u64) -> SphereRecipe {
        match self {
            SphereInitial::Constant { value } => SphereRecipe::Constant { value: value.clone() },
            SphereInitial::SmoothRandom { amplitude } => SphereRecipe::SmoothRandom { seed, amplitude: *amplitude },
            SphereInitial::NodalNoise { amplitude } => SphereRecipe::NodalNoise { seed, amplitude: *amplitude },
        }
    }
}

/// Periodic grid on the torus of side 1 with values in S^{L-1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSettings {
    pub dim: usize,
    pub cells: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default = "default_sphere_initial")]
    pub initial: SphereInitial,
}

fn default_sphere_initial() -> SphereInitial {
    SphereInitial::SmoothRandom { amplitude: 0.8 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_ns() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

fn default_trials() -> usize {
    1000
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { ns: default_ns(), trials: default_trials() }
    }
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Master seed; every random stream is split from it.
    #[serde(default)]
    pub seed: u64,
    /// Matrix size for fixed and moving runs.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(rename = "T", default)]
    pub horizon: Option<f64>,
    #[serde(rename = "N", default)]
    pub steps: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub motion: Option<InterfaceMotion>,
    #[serde(default)]
    pub stepper: Option<StepConfig>,
    #[serde(default)]
    pub el_tests: Option<LibrarySpec>,
    /// Write a field snapshot every k steps; 0 disables.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Relative to the output root unless absolute.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Reject moving runs whose measured ‖DΦ − I‖∞/h exceeds this.
    #[serde(default)]
    pub c0_cap: Option<f64>,
    #[serde(default)]
    pub sphere: Option<SphereSettings>,
    #[serde(default)]
    pub verify: Option<VerifySettings>,
}

/// Raised for anything that should exit with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl RunConfig {
    /// A config with only the mode and seed set.
    pub fn bare(mode: Mode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            n: None,
            geometry: None,
            initial: InitialSpec::default(),
            horizon: None,
            steps: None,
            lambda: DEFAULT_LAMBDA,
            motion: None,
            stepper: None,
            el_tests: None,
            snapshot_every: 0,
            output_dir: None,
            c0_cap: None,
            sphere: None,
            verify: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Parses and validates; errors name the offending key path.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn require<T: Clone>(&self, value: &Option<T>, key: &str) -> Result<T> {
        match value {
            Some(v) => Ok(v.clone()),
            None => bail!("missing key `{key}` required by mode {:?}", self.mode),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Verify => {
                let v = self.verify.clone().unwrap_or_default();
                if v.ns.is_empty() || v.ns.iter().any(|&n| n < 2) {
                    bail!("`verify.ns` must be a nonempty list of sizes >= 2");
                }
                if v.trials == 0 {
                    bail!("`verify.trials` must be positive");
                }
                return Ok(());
            }
            Mode::Sphere => {
                let s = self.require(&self.sphere, "sphere")?;
                if s.l < 2 {
                    bail!("`sphere.L` must be at least 2");
                }
            }
            Mode::Fixed | Mode::Moving => {
                let n = self.require(&self.n, "n")?;
                if n < 2 {
                    bail!("`n` must be at least 2, got {n}");
                }
                self.require(&self.geometry, "geometry")?.validate().context("`geometry`")?;
            }
        }
        let flow = self.flow_config()?;
        flow.validate().context("flow settings")?;
        match (self.mode, &flow.motion) {
            (Mode::Fixed, InterfaceMotion::Stationary) | (Mode::Sphere, InterfaceMotion::Stationary) => {}
            (Mode::Fixed, _) | (Mode::Sphere, _) => bail!("`motion` is only valid in moving mode"),
            (Mode::Moving, InterfaceMotion::Stationary) => bail!("moving mode needs a non-stationary `motion`"),
            (Mode::Moving, m) => {
                let t0 = m.lifespan();
                if flow.horizon >= (1.0 - LIFESPAN_MARGIN) * t0 {
                    let detail = match m {
                        InterfaceMotion::ShrinkingCircle { r0 } => format!(" = r0^2/2 (r0 = {r0})"),
                        _ => String::new(),
                    };
                    bail!(
                        "`T` = {} exceeds the admissible lifespan: T0{detail} = {t0:.6}, and T must stay below {} T0",
                        flow.horizon,
                        1.0 - LIFESPAN_MARGIN
                    );
                }
            }
            (Mode::Verify, _) => unreachable!(),
        }
        if let Some(cap) = self.c0_cap {
            if !(cap > 0.0) {
                bail!("`c0_cap` must be positive");
            }
        }
        Ok(())
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let horizon = self.require(&self.horizon, "T")?;
        let steps = self.require(&self.steps, "N")?;
        let mut cfg = FlowConfig::new(horizon, steps);
        cfg.lambda = self.lambda;
        cfg.motion = self.motion.clone().unwrap_or(InterfaceMotion::Stationary);
        cfg.stepper = self.stepper;
        cfg.snapshot_every = self.snapshot_every;
        if let Some(spec) = self.el_tests {
            cfg.el_tests = spec;
        }
        Ok(cfg)
    }

    pub fn output_dir(&self, root: &Path, config_path: Option<&Path>) -> PathBuf {
        let name = self.output_dir.clone().unwrap_or_else(|| {
            let stem = config_path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned());
            PathBuf::from(stem.unwrap_or_else(|| "run".into()))
        });
        root.join(name)
    }
}

/// `$HARMFLOW_OUTPUT_ROOT`, or the current directory.
pub fn output_root() -> PathBuf {
    std::env::var_os("HARMFLOW_OUTPUT_ROOT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}
