use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::{usage, Mode, RunConfig};
use crate::run::execute;
use crate::summary::Summary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
pub enum Param {
    #[value(name = "N")]
    #[serde(rename = "N")]
    Steps,
    #[value(name = "seed")]
    #[serde(rename = "seed")]
    Seed,
    #[value(name = "lambda")]
    #[serde(rename = "lambda")]
    Lambda,
}

impl Param {
    fn label(self) -> &'static str {
        match self {
            Param::Steps => "N",
            Param::Seed => "seed",
            Param::Lambda => "lambda",
        }
    }

    fn apply(self, base: &RunConfig, raw: &str) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let bad = |e: &dyn std::fmt::Display| usage(format!("bad value `{raw}` for {}: {e}", self.label()));
        match self {
            Param::Steps => cfg.steps = Some(raw.parse().map_err(|e| bad(&e))?),
            Param::Seed => cfg.seed = raw.parse().map_err(|e| bad(&e))?,
            Param::Lambda => cfg.lambda = raw.parse().map_err(|e| bad(&e))?,
        }
        cfg.validate().map_err(|e| usage(format!("{} = {raw}: {e:#}", self.label())))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub h: f64,
    pub passed: bool,
    pub initial_dirichlet: f64,
    pub final_dirichlet: f64,
    pub gap_total: f64,
    pub c_tilde: Option<f64>,
    pub attachment: Option<f64>,
    pub el_residual_max: Option<f64>,
    pub weak_residual: Option<f64>,
    pub failures: Vec<String>,
}

impl SweepEntry {
    fn new(value: &str, cfg: &RunConfig, s: &Summary) -> Self {
        let e = s.energies.clone().unwrap_or_default();
        let c = s.constants.clone().unwrap_or_default();
        Self {
            value: value.to_string(),
            h: cfg.horizon.unwrap_or(0.0) / cfg.steps.unwrap_or(1) as f64,
            passed: s.passed,
            initial_dirichlet: e.initial_dirichlet,
            final_dirichlet: e.final_dirichlet,
            gap_total: e.gap_total,
            c_tilde: c.c_tilde,
            attachment: c.attachment,
            el_residual_max: s.el_residual_max,
            weak_residual: s.weak_residual,
            failures: s.failures().into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub param: Param,
    pub values: Vec<String>,
    pub entries: Vec<SweepEntry>,
    /// Least-squares slope of log(gap_total) against log(h); N sweeps only.
    pub gap_slope: Option<f64>,
    /// Weak residual strictly decreasing along the sweep order.
    pub weak_residual_decreasing: Option<bool>,
    /// Every entry produced the same invariant verdicts.
    pub verdicts_identical: bool,
    /// All final energies differ; reported for seed sweeps.
    pub distinct_trajectories: Option<bool>,
    pub passed: bool,
    /// Set when a run aborted the sweep; earlier entries are kept.
    pub aborted: Option<String>,
}

/// Least-squares slope of log y against log x over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl SweepReport {
    pub fn param_label(&self) -> &'static str {
        self.param.label()
    }

    fn aggregate(&mut self, verdicts: &[Vec<(String, bool)>]) {
        let e = &self.entries;
        self.gap_slope = if self.param == Param::Steps {
            loglog_slope(&e.iter().map(|x| (x.h, x.gap_total)).collect::<Vec<_>>())
        } else {
            None
        };
        let weak: Option<Vec<f64>> = e.iter().map(|x| x.weak_residual).collect();
        self.weak_residual_decreasing = weak.filter(|w| w.len() >= 2).map(|w| w.windows(2).all(|p| p[1] < p[0]));
        self.verdicts_identical = verdicts.windows(2).all(|w| w[0] == w[1]);
        self.distinct_trajectories = (self.param == Param::Seed).then(|| {
            let f: Vec<f64> = e.iter().map(|x| x.final_dirichlet).collect();
            f.iter().enumerate().all(|(i, a)| f[i + 1..].iter().all(|b| a != b))
        });
        self.passed = self.aborted.is_none() && e.iter().all(|x| x.passed);
    }

    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("cannot write sweep.json in {}", dir.display()))?;
        let mut csv = String::from("value,h,passed,initial_dirichlet,final_dirichlet,gap_total,c_tilde,attachment,el_residual_max,weak_residual\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for x in &self.entries {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                x.value,
                x.h,
                x.passed,
                x.initial_dirichlet,
                x.final_dirichlet,
                x.gap_total,
                opt(x.c_tilde),
                opt(x.attachment),
                opt(x.el_residual_max),
                opt(x.weak_residual)
            )?;
        }
        std::fs::write(dir.join("sweep.csv"), csv).with_context(|| format!("cannot write sweep.csv in {}", dir.display()))
    }
}

/// Runs `base` once per value, each in its own subdirectory of `dir`.
pub fn sweep(base: &RunConfig, param: Param, values: &[String], dir: &Path) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(usage("sweep needs at least one value"));
    }
    if base.mode == Mode::Verify {
        return Err(usage("verify mode cannot be swept"));
    }
    // Validate every value before running anything.
    let configs: Vec<RunConfig> = values.iter().map(|v| param.apply(base, v)).collect::<Result<_>>()?;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut report = SweepReport {
        param,
        values: values.to_vec(),
        entries: Vec::new(),
        gap_slope: None,
        weak_residual_decreasing: None,
        verdicts_identical: true,
        distinct_trajectories: None,
        passed: false,
        aborted: None,
    };
    let mut verdicts = Vec::new();
    for (value, cfg) in values.iter().zip(&configs) {
        let sub = dir.join(format!("{}_{value}", param.label()));
        match execute(cfg, &sub) {
            Ok(s) => {
                verdicts.push(s.invariants.iter().map(|c| (c.name.clone(), c.passed)).collect::<Vec<_>>());
                report.entries.push(SweepEntry::new(value, cfg, &s));
                report.aggregate(&verdicts);
                report.write(dir)?;
            }
            Err(e) => {
                report.aborted = Some(format!("{} = {value}: {e:#}", param.label()));
                report.aggregate(&verdicts);
                report.write(dir)?;
                return Err(e.context(format!("sweep aborted at {} = {value}", param.label())));
            }
        }
    }
    Ok(report)
}
