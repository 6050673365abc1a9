//! The `summary.json` written by every run.
//!
//! Keys: `mode`, `seed`, `passed`, `invariants` (list of `{name, passed,
//! value}`), and when the mode produces them `energies`, `constants`,
//! `el_residual_max`, `weak_residual`, `lambda_pairs`, `verify`, `trace` and
//! `snapshots`. `passed` is true iff every listed invariant passed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use harmflow::flow::{InvariantCheck, LambdaPairStats};
use harmflow::motion::DiffeoReport;
use harmflow::verify::VerifyReport;
use serde::Serialize;

use crate::config::{Mode, RunConfig};

#[derive(Clone, Debug, Default, Serialize)]
pub struct Energies {
    pub initial_dirichlet: f64,
    pub final_dirichlet: f64,
    /// Over steps 1..N.
    pub sup_dirichlet: f64,
    pub kinetic_total: f64,
    /// ∫∫ of the squared gap between the piecewise linear and constant interpolants.
    pub gap_total: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Constants {
    /// Smallest rate making e^{-C̃t}·dirichlet non-increasing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_tilde: Option<f64>,
    /// max_m ‖A^m − A0‖² / (t_m · dirichlet(A0)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attachment: Option<f64>,
    /// gap_total / (T · h · dirichlet(A0)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// C0, C1, C2 and the Jacobian constant of the diffeomorphism family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffeo: Option<DiffeoReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub seed: u64,
    pub passed: bool,
    pub invariants: Vec<InvariantCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energies: Option<Energies>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub el_residual_max: Option<f64>,
    /// Weak Neumann residual of the chord interpolant (matrix runs) or the
    /// largest wedge residual component (sphere runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_pairs: Option<LambdaPairStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<PathBuf>,
}

impl Summary {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            mode: cfg.mode,
            seed: cfg.seed,
            passed: false,
            invariants: Vec::new(),
            energies: None,
            constants: None,
            el_residual_max: None,
            weak_residual: None,
            lambda_pairs: None,
            verify: None,
            trace: None,
            snapshots: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.passed = self.invariants.iter().all(|c| c.passed);
    }

    pub fn failures(&self) -> Vec<&str> {
        self.invariants.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}
