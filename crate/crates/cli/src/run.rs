use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use harmflow::flow::{lambda_pair_statistics, run_flow, FlowTrace, InterpolantSet, InvariantCheck};
use harmflow::functional::{weak_neumann_residual, SpaceTimeTest, TimeHat, WeakFormOptions};
use harmflow::grid::{make_initial, write_snapshot, TwoPhaseGrid};
use harmflow::motion::{build_diffeos, verify_diffeo_bounds};
use harmflow::sphere::{run_sphere_flow, wedge_residual, SphereField, SphereHistory, SphereTest, TorusGrid, WedgePairing, UNIT_TOL};
use harmflow::{verify, Field};

use crate::config::{Mode, RunConfig};
use crate::summary::{Constants, Energies, Summary};

/// Samples per slab for the λ-interpolant pair statistics.
const LAMBDA_SAMPLES: usize = 64;
/// Euler–Lagrange residual accepted at a converged step.
const EL_TOL: f64 = 1e-6;
const EXCESS_TOL: f64 = 1e-10;

fn check(name: &str, passed: bool, value: f64) -> InvariantCheck {
    InvariantCheck { name: name.to_string(), passed, value }
}

fn middle_hat(horizon: f64) -> TimeHat {
    TimeHat { start: 0.2 * horizon, peak: 0.5 * horizon, end: 0.8 * horizon }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

/// Runs the configured pipeline, writing everything under `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut summary = match cfg.mode {
        Mode::Fixed | Mode::Moving => matrix_run(cfg, out)?,
        Mode::Sphere => sphere_run(cfg, out)?,
        Mode::Verify => verify_run(cfg)?,
    };
    summary.finish();
    summary.write(&out.join("summary.json"))?;
    Ok(summary)
}

/// Continuous hat bumps of the configured library, one time hat.
fn weak_tests(cfg: &RunConfig, a0: &Field, horizon: f64) -> Vec<SpaceTimeTest> {
    let spec = cfg.el_tests.unwrap_or_default();
    spec.bumps(a0.grid().geometry(), a0.n())
        .into_iter()
        .filter(|b| !b.jump)
        .map(|space| SpaceTimeTest { space, time: middle_hat(horizon) })
        .collect()
}

fn write_matrix_snapshots(set: &InterpolantSet, every: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if every == 0 {
        return Ok(written);
    }
    let n_steps = set.steps.len();
    let mut emit = |m: usize, field: &Field| -> Result<()> {
        let path = out.join(format!("snapshot_{m:05}.txt"));
        let mut w = create(&path)?;
        write_snapshot(field, &mut w)?;
        w.flush()?;
        written.push(path);
        Ok(())
    };
    emit(0, &set.initial)?;
    for m in 1..=n_steps {
        if m % every == 0 || m == n_steps {
            emit(m, &set.steps[m - 1].field)?;
        }
    }
    Ok(written)
}

fn matrix_run(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    let flow_cfg = cfg.flow_config()?;
    let geometry = cfg.geometry.clone().expect("validated");
    let n = cfg.n.expect("validated");
    let grid = Arc::new(TwoPhaseGrid::new(geometry)?);
    let a0: Field = make_initial(grid, n, &cfg.initial.recipe(cfg.seed))?;
    let (set, trace) = run_flow(&a0, &flow_cfg)?;

    let trace_path = out.join("trace.csv");
    let mut w = create(&trace_path)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let snapshots = write_matrix_snapshots(&set, cfg.snapshot_every, out)?;

    let mut invariants = trace.check_invariants();
    let el = trace.el_residual_max();
    invariants.push(check("discrete_euler_lagrange", el <= EL_TOL, el));
    let stats = lambda_pair_statistics(&set, flow_cfg.lambda, LAMBDA_SAMPLES)?;
    let off = (stats.fraction_exact - flow_cfg.lambda).abs();
    invariants.push(check("lambda_pair_fraction", off <= 1.0 / flow_cfg.steps as f64, stats.fraction_exact));
    let d0 = trace.initial_dirichlet();
    let gap = trace.gap_total();
    if !trace.moving {
        let bound = 2.0 * flow_cfg.horizon * flow_cfg.h() * d0;
        invariants.push(check("interpolant_gap_bound", gap <= bound + EXCESS_TOL, gap - bound));
    }

    let mut constants = Constants {
        c_tilde: Some(trace.c_tilde()),
        attachment: Some(trace.attachment_constant()),
        gap: (d0 > 0.0).then(|| gap / (flow_cfg.horizon * flow_cfg.h() * d0)),
        ..Default::default()
    };
    if trace.moving {
        let fam = build_diffeos(flow_cfg.motion.clone(), flow_cfg.h(), flow_cfg.horizon)?;
        match verify_diffeo_bounds(&fam, cfg.c0_cap) {
            Ok(rep) => {
                invariants.push(check("diffeo_bounds", true, rep.c0));
                constants.diffeo = Some(rep);
            }
            Err(harmflow::Error::DiffeoBound { ratio, .. }) => invariants.push(check("diffeo_bounds", false, ratio)),
            Err(e) => return Err(e.into()),
        }
    }
    let weak = weak_neumann_residual(&set.slabs(), &weak_tests(cfg, &a0, flow_cfg.horizon), WeakFormOptions::default())?;

    let mut summary = Summary::new(cfg);
    summary.energies = Some(energies(&trace));
    summary.constants = Some(constants);
    summary.invariants = invariants;
    summary.el_residual_max = Some(el);
    summary.weak_residual = Some(weak);
    summary.lambda_pairs = Some(stats);
    summary.trace = Some(trace_path);
    summary.snapshots = snapshots;
    Ok(summary)
}

fn energies(trace: &FlowTrace) -> Energies {
    Energies {
        initial_dirichlet: trace.initial_dirichlet(),
        final_dirichlet: trace.final_dirichlet(),
        sup_dirichlet: trace.sup_dirichlet(),
        kinetic_total: trace.kinetic_total(),
        gap_total: trace.gap_total(),
    }
}

fn write_sphere_snapshot(u: &SphereField, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let grid = u.grid();
    writeln!(w, "# torus dim={} cells={} L={}", grid.dim, grid.cells, u.l())?;
    for i in 0..grid.len() {
        let row: Vec<String> = u.node(i).iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn sphere_snapshots(hist: &SphereHistory, every: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if every == 0 {
        return Ok(written);
    }
    let n_steps = hist.steps.len();
    let path = out.join("sphere_00000.csv");
    write_sphere_snapshot(&hist.initial, &path)?;
    written.push(path);
    for m in 1..=n_steps {
        if m % every == 0 || m == n_steps {
            let path = out.join(format!("sphere_{m:05}.csv"));
            write_sphere_snapshot(&hist.steps[m - 1], &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn sphere_run(cfg: &RunConfig, out: &Path) -> Result<Summary> {
    let s = cfg.sphere.clone().expect("validated");
    let flow_cfg = cfg.flow_config()?;
    let grid = TorusGrid::new(s.dim, s.cells)?;
    let u0 = SphereField::from_recipe(grid, s.l, &s.initial.recipe(cfg.seed))?;
    let (hist, trace) = run_sphere_flow(&u0, flow_cfg.horizon, flow_cfg.steps, flow_cfg.lambda, cfg.stepper.as_ref())?;

    let trace_path = out.join("trace.csv");
    let mut w = create(&trace_path)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let snapshots = sphere_snapshots(&hist, cfg.snapshot_every, out)?;

    let el = trace.el_residual_max();
    let norm = trace.norm_deviation_max();
    let invariants = vec![
        check("discrete_euler_lagrange", el <= EL_TOL, el),
        check("unit_norm", norm <= UNIT_TOL, norm),
        check("per_step_energy_inequality", trace.per_step_excess() <= EXCESS_TOL, trace.per_step_excess()),
        check("running_energy_inequality", trace.energy_excess_running() <= EXCESS_TOL, trace.energy_excess_running()),
        check("energy_inequality", trace.energy_excess_literal() <= EXCESS_TOL, trace.energy_excess_literal()),
    ];
    let test = SphereTest { center: [0.5, 0.5], radius: 0.3, time: middle_hat(flow_cfg.horizon) };
    let wedge = wedge_residual(&hist, &test, WedgePairing::Linear).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let attachment = trace.rows[1..].iter().map(|r| r.attachment_ratio).fold(0.0, f64::max);

    let mut summary = Summary::new(cfg);
    summary.energies = Some(Energies {
        initial_dirichlet: trace.initial_dirichlet(),
        final_dirichlet: trace.rows.last().map(|r| r.dirichlet).unwrap_or_default(),
        sup_dirichlet: trace.sup_dirichlet(),
        kinetic_total: trace.kinetic_total(),
        gap_total: trace.gap_total(),
    });
    summary.constants = Some(Constants { attachment: Some(attachment), gap: Some(trace.gap_constant()), ..Default::default() });
    summary.invariants = invariants;
    summary.el_residual_max = Some(el);
    summary.weak_residual = Some(wedge);
    summary.trace = Some(trace_path);
    summary.snapshots = snapshots;
    Ok(summary)
}

fn verify_run(cfg: &RunConfig) -> Result<Summary> {
    let v = cfg.verify.clone().unwrap_or_default();
    let report = verify::run_all(&v.ns, v.trials, cfg.seed)?;
    let mut summary = Summary::new(cfg);
    summary.invariants = verify_checks(&report);
    summary.verify = Some(report);
    Ok(summary)
}

/// One named verdict per suite and matrix size.
pub fn verify_checks(report: &verify::VerifyReport) -> Vec<InvariantCheck> {
    let mut out = Vec::new();
    for r in &report.v_perp {
        let worst = r.reconstruction_max.max(r.orthogonality_max).max(r.idempotence_max);
        out.push(check(&format!("v_splitting_n{}", r.n), r.passed, worst));
    }
    for r in &report.tangent_normal {
        out.push(check(&format!("tangent_normal_n{}", r.n), r.passed, r.normal_against_tangent_max.max(r.basis_gram_max)));
    }
    for r in &report.equivalences {
        out.push(check(&format!("neumann_equivalences_n{}", r.n), r.passed, r.inconsistencies as f64));
    }
    out
}
