//! Orchestration: build core objects from a validated config, run the
//! experiment, write artifacts, fold checks into a summary.
//!
//! Error phases map to exit codes: everything up to and including object
//! construction is a configuration error (exit 2), anything the solver or
//! the diagnostics raise afterwards is numerical (exit 3). A run whose
//! checks fail is not an error — it completes, writes its artifacts, and
//! exits 1.

use crate::config::{
    self, EstimateSpec, ExperimentConfig, GridSpec, InitialSpec, Kind, LojaSpec, SolverSpec,
};
use crate::{samples, svg, Result, RunError};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use wloja_core::flows::{atomic_flow, solve, SolverControls, Trajectory};
use wloja_core::functionals::{gibbs_profile, EnergyFunctional, EntropyKernel};
use wloja_core::loja::{
    fit_exponent, functional_margin, gradient_margin, verify_bounds, FitKind, LojaEstimate,
};
use wloja_core::measures::{AtomicMeasure, Grid1D, GridMeasure, Measure};
use wloja_core::numeric::format_sig17;
use wloja_core::potentials::{holley_stroock_rate, Potential};
use wloja_core::transport::w2_grid;

/// Tolerance for the automatic inequality-margin checks along a flow; the
/// analytic margins are exact, so this only absorbs discretization error.
pub const MARGIN_TOL: f64 = 1e-3;

/// Command-line overrides; they win over the corresponding config fields.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.into(), pass, detail }
    }
}

#[derive(Debug, Serialize)]
pub struct Estimates {
    pub theta: f64,
    pub c_g: f64,
    pub c_f: f64,
    pub jhat: f64,
    pub residual: f64,
    pub samples: usize,
}

impl From<&LojaEstimate> for Estimates {
    fn from(e: &LojaEstimate) -> Self {
        Estimates {
            theta: e.theta,
            c_g: e.c_g,
            c_f: e.c_f,
            jhat: e.jhat,
            residual: e.residual,
            samples: e.sample_count,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub kind: &'static str,
    pub seed: u64,
    pub all_pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Estimates>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn exit_code(&self) -> u8 {
        if self.all_pass {
            0
        } else {
            1
        }
    }

    fn assemble(
        kind: Kind,
        seed: u64,
        checks: Vec<Check>,
        estimates: Option<Estimates>,
        artifacts: Vec<String>,
    ) -> Self {
        Summary {
            kind: kind.name(),
            seed,
            all_pass: checks.iter().all(|c| c.pass),
            checks,
            estimates,
            artifacts,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

fn numerical_err(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(e.to_string())
}

fn resolve_out(ov: &Overrides, cfg: &ExperimentConfig) -> PathBuf {
    ov.out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("WLOJA_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve_seed(ov: &Overrides, cfg: &ExperimentConfig) -> u64 {
    ov.seed.or(cfg.seed).unwrap_or(0)
}

/// Entry point for `wloja run`. Returns the process exit code.
pub fn run_file(path: &Path, ov: &Overrides) -> Result<u8> {
    let cfg = config::load(path)?;
    let out = resolve_out(ov, &cfg);
    if cfg.kind == Kind::Sweep {
        let members = cfg.configs.clone().expect("validated");
        let named = members
            .into_iter()
            .enumerate()
            .map(|(i, m)| (format!("run_{i:03}"), Ok(m)))
            .collect();
        return run_members(named, &out, ov);
    }
    let summary = run_config(&cfg, &out, resolve_seed(ov, &cfg))?;
    if !ov.quiet {
        println!("{}", status_line(&out.display().to_string(), &summary));
    }
    Ok(summary.exit_code())
}

/// Entry point for `wloja sweep`: a directory of `*.json` configs or a
/// single config of kind sweep with inline members.
pub fn sweep_path(path: &Path, ov: &Overrides) -> Result<u8> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
            .filter_map(|entry| entry.ok().map(|d| d.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(RunError::Config(format!("no .json configs in {}", path.display())));
        }
        let out_root = ov.out.clone().or_else(|| std::env::var_os("WLOJA_OUT").map(PathBuf::from));
        let out_root = out_root.unwrap_or_else(|| PathBuf::from("."));
        let named = files
            .iter()
            .map(|p| {
                let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                (name, config::load(p))
            })
            .collect();
        run_members(named, &out_root, ov)
    } else {
        let cfg = config::load(path)?;
        if cfg.kind != Kind::Sweep {
            return Err(RunError::Config(format!(
                "{} is a single {} config; use `wloja run` or a sweep-kind config",
                path.display(),
                cfg.kind.name()
            )));
        }
        let out = resolve_out(ov, &cfg);
        let named = cfg
            .configs
            .clone()
            .expect("validated")
            .into_iter()
            .enumerate()
            .map(|(i, m)| (format!("run_{i:03}"), Ok(m)))
            .collect();
        run_members(named, &out, ov)
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    name: String,
    exit: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Summary>,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    all_pass: bool,
    runs: Vec<SweepRow>,
}

/// Runs members in order, isolating failures: a broken config or a failed
/// run is recorded in its row and the remaining members still execute.
fn run_members(
    members: Vec<(String, Result<ExperimentConfig>)>,
    out_root: &Path,
    ov: &Overrides,
) -> Result<u8> {
    let mut rows = Vec::new();
    for (name, loaded) in members {
        let row = match loaded {
            Err(e) => SweepRow { name, exit: e.exit_code(), error: Some(e.to_string()), summary: None },
            Ok(cfg) if cfg.kind == Kind::Sweep => SweepRow {
                name,
                exit: 2,
                error: Some("config: sweeps do not nest".into()),
                summary: None,
            },
            Ok(cfg) => {
                let sub_out = out_root.join(&name);
                // member `out` fields are ignored: every member writes under
                // its own subdirectory so no two runs share a file
                match run_config(&cfg, &sub_out, resolve_seed(ov, &cfg)) {
                    Ok(summary) => SweepRow {
                        name,
                        exit: summary.exit_code(),
                        error: None,
                        summary: Some(summary),
                    },
                    Err(e) => SweepRow {
                        name,
                        exit: e.exit_code(),
                        error: Some(e.to_string()),
                        summary: None,
                    },
                }
            }
        };
        if !ov.quiet {
            match (&row.error, &row.summary) {
                (Some(e), _) => println!("{}: ERROR ({e})", row.name),
                (None, Some(s)) => println!("{}", status_line(&row.name, s)),
                _ => unreachable!(),
            }
        }
        rows.push(row);
    }
    let merged = SweepSummary { all_pass: rows.iter().all(|r| r.exit == 0), runs: rows };
    fs::create_dir_all(out_root).map_err(config_err)?;
    write_text(
        &out_root.join("sweep_summary.json"),
        &(serde_json::to_string_pretty(&merged).map_err(numerical_err)? + "\n"),
    )?;
    // severity order: config error > numerical failure > check failure
    let exit = [2u8, 3, 1]
        .into_iter()
        .find(|code| merged.runs.iter().any(|r| r.exit == *code))
        .unwrap_or(0);
    Ok(exit)
}

fn status_line(name: &str, s: &Summary) -> String {
    let failed = s.checks.iter().filter(|c| !c.pass).count();
    if s.all_pass {
        format!("{name}: PASS ({} checks)", s.checks.len())
    } else {
        format!("{name}: FAIL ({failed} of {} checks failed)", s.checks.len())
    }
}

/// Runs one non-sweep config into `out_dir` and writes `summary.json`.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Summary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(config_err)?;
    let summary = match cfg.kind {
        Kind::Flow => run_flow(cfg, out_dir, seed)?,
        Kind::Inequality => run_inequality(cfg, out_dir, seed)?,
        Kind::Estimate => run_estimate(cfg, out_dir, seed)?,
        Kind::Sweep => unreachable!("sweeps are expanded by the caller"),
    };
    write_text(
        &out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).map_err(numerical_err)? + "\n"),
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------- building

fn build_grid(spec: &GridSpec) -> Result<Grid1D> {
    Grid1D::new(spec.x_min, spec.x_max, spec.n).map_err(config_err)
}

fn build_potential(cfg: &ExperimentConfig, grid: Option<Grid1D>) -> Result<Potential> {
    let spec = cfg.potential.as_ref().expect("validated");
    let v = Potential::builtin(&spec.name, &spec.params).map_err(config_err)?;
    match grid {
        Some(g) => v.with_window(g.x_min, g.x_max).map_err(config_err),
        None => Ok(v),
    }
}

/// Kernel exponent doubles as the diffusion exponent of the flow.
fn build_functional(
    cfg: &ExperimentConfig,
    v: &Potential,
    grid: Option<Grid1D>,
) -> Result<(EnergyFunctional, f64)> {
    let spec = cfg.functional.as_ref().expect("validated");
    let m = spec.m.unwrap_or(1.0);
    match spec.family.as_str() {
        "relative" => {
            let g = grid.expect("validated");
            let reference = gibbs_profile(v, g).map_err(config_err)?.profile;
            Ok((EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference), 1.0))
        }
        "internal_potential" => {
            let g = grid.expect("validated");
            let kernel = if m == 1.0 {
                EntropyKernel::boltzmann()
            } else {
                EntropyKernel::power(m).map_err(config_err)?
            };
            let f = EnergyFunctional::internal_plus_potential(kernel, v.clone(), g)
                .map_err(config_err)?;
            Ok((f, m))
        }
        "potential_only" => Ok((EnergyFunctional::potential_only(v.clone()), 1.0)),
        other => Err(RunError::Config(format!("unknown functional family '{other}'"))),
    }
}

fn build_initial(spec: &InitialSpec, grid: Option<Grid1D>) -> Result<Measure> {
    let need_grid = || {
        grid.ok_or_else(|| RunError::Config("density initial conditions need a grid".into()))
    };
    match spec {
        InitialSpec::Gaussian { mu, sigma } => {
            let g = need_grid()?;
            Ok(Measure::Grid(GridMeasure::gaussian(g, *mu, *sigma).map_err(config_err)?))
        }
        InitialSpec::Uniform { a, b } => {
            let g = need_grid()?;
            Ok(Measure::Grid(GridMeasure::uniform(g, *a, *b).map_err(config_err)?))
        }
        InitialSpec::Atoms { positions, weights } => {
            if positions.len() != weights.len() {
                return Err(RunError::Config(format!(
                    "atoms: {} positions vs {} weights",
                    positions.len(),
                    weights.len()
                )));
            }
            let atoms = positions.iter().cloned().zip(weights.iter().cloned()).collect();
            Ok(Measure::Atomic(AtomicMeasure::new(atoms).map_err(config_err)?))
        }
        InitialSpec::File { path } => read_measure_csv(path, grid),
    }
}

/// Reads a measure CSV as written by the library: header `x,density` for a
/// grid measure (values are re-normalized on the config grid, which must
/// match row-for-row) or `x,weight` for atoms.
fn read_measure_csv(path: &Path, grid: Option<Grid1D>) -> Result<Measure> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| {
            s.and_then(|p| p.trim().parse::<f64>().ok()).ok_or_else(|| {
                RunError::Config(format!("{}: bad row {}: '{line}'", path.display(), i + 2))
            })
        };
        rows.push((parse(parts.next())?, parse(parts.next())?));
    }
    match header {
        "x,density" => {
            let g = grid.ok_or_else(|| {
                RunError::Config("a density file initial condition needs a grid".into())
            })?;
            if rows.len() != g.n {
                return Err(RunError::Config(format!(
                    "{}: {} rows but the grid has {} cells",
                    path.display(),
                    rows.len(),
                    g.n
                )));
            }
            for (i, (x, _)) in rows.iter().enumerate() {
                if (x - g.center(i)).abs() > 1e-9 * g.dx() {
                    return Err(RunError::Config(format!(
                        "{}: row {} is at x = {x}, grid center is {}",
                        path.display(),
                        i + 2,
                        g.center(i)
                    )));
                }
            }
            let vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
            Ok(Measure::Grid(GridMeasure::normalize(&vals, g).map_err(config_err)?))
        }
        "x,weight" => {
            Ok(Measure::Atomic(AtomicMeasure::new(rows).map_err(config_err)?))
        }
        other => Err(RunError::Config(format!(
            "{}: unknown measure header '{other}' (expected 'x,density' or 'x,weight')",
            path.display()
        ))),
    }
}

fn build_controls(spec: &SolverSpec) -> Result<SolverControls> {
    let mut c = SolverControls::new(spec.t_end).map_err(config_err)?;
    if let Some(cfl) = spec.cfl {
        c = c.with_cfl(cfl).map_err(config_err)?;
    }
    if let Some(stride) = spec.snapshot_stride {
        c = c.with_snapshot_stride(stride).map_err(config_err)?;
    }
    if let Some(max_steps) = spec.max_steps {
        c = c.with_max_steps(max_steps).map_err(config_err)?;
    }
    if let Some(dt) = spec.fixed_dt {
        c = c.with_fixed_dt(dt).map_err(config_err)?;
    }
    Ok(c)
}

fn build_estimate(spec: &LojaSpec, default_jhat: f64) -> Result<LojaEstimate> {
    let jhat = spec.jhat.unwrap_or(default_jhat);
    let est = match (spec.c_g, spec.c_f) {
        (Some(c_g), None) => LojaEstimate::from_gradient(spec.theta, c_g, jhat),
        (None, Some(c_f)) => LojaEstimate::from_functional(spec.theta, c_f, jhat),
        _ => unreachable!("validated"),
    }
    .map_err(config_err)?;
    match spec.r0 {
        Some(r0) => est.with_r0(r0).map_err(config_err),
        None => Ok(est),
    }
}

// ----------------------------------------------------------------- running

struct FlowRun {
    traj: Trajectory,
    functional: EnergyFunctional,
    potential: Potential,
    kernel_m: Option<f64>,
    checks: Vec<Check>,
    artifacts: Vec<String>,
}

/// Shared by the flow and estimate-from-trajectory kinds: build, solve,
/// write trajectory artifacts, run the sanity checks.
fn execute_flow(cfg: &ExperimentConfig, out_dir: &Path) -> Result<FlowRun> {
    let grid = cfg.grid.as_ref().map(build_grid).transpose()?;
    let potential = build_potential(cfg, grid)?;
    let (functional, m) = build_functional(cfg, &potential, grid)?;
    let initial = build_initial(cfg.initial.as_ref().expect("validated"), grid)?;
    let controls = build_controls(cfg.solver.as_ref().expect("validated"))?;

    let grid_flow = matches!(initial, Measure::Grid(_));
    let traj = match &initial {
        Measure::Grid(rho0) => {
            if matches!(functional.family(), wloja_core::functionals::Family::PotentialOnly { .. })
            {
                return Err(RunError::Config(
                    "potential_only flows evolve atomic measures".into(),
                ));
            }
            solve(rho0, &functional, &potential, m, &controls).map_err(numerical_err)?
        }
        Measure::Atomic(mu0) => atomic_flow(mu0, &potential, &controls).map_err(numerical_err)?,
    };

    let mut artifacts = vec!["trajectory.csv".to_string()];
    write_text(&out_dir.join("trajectory.csv"), &traj.to_csv())?;
    let states_dir = out_dir.join("states");
    fs::create_dir_all(&states_dir).map_err(config_err)?;
    for (k, state) in traj.states.iter().enumerate() {
        let name = format!("snapshot_{k:04}.csv");
        write_text(&states_dir.join(&name), &state.to_csv())?;
        artifacts.push(format!("states/{name}"));
    }

    let checks = trajectory_checks(&traj);
    Ok(FlowRun {
        checks,
        artifacts,
        kernel_m: grid_flow.then_some(m),
        traj,
        functional,
        potential,
    })
}

/// Convexity rate 2K for the gradient/functional margin checks: the
/// Holley-Stroock rate when the potential splits as convex + bounded
/// (oscillation 0 reduces it to 2K), plain 2K otherwise. Power entropies
/// (m > 1) do not get the perturbation argument, only the convex rate.
fn margin_rate(v: &Potential, kernel_m: f64) -> Option<f64> {
    if kernel_m == 1.0 {
        if let Some(d) = v.decomposition().filter(|d| d.k > 0.0) {
            return v.osc().ok().map(|osc| holley_stroock_rate(d.k, osc));
        }
    }
    v.k().map(|k| 2.0 * k)
}

/// Gradient and functional (distance) margin checks along a grid flow:
/// LSI/Talagrand for the Boltzmann kernel, the Gagliardo-Nirenberg and
/// Ohta-Takatsu analogues for power kernels. Skipped when the potential
/// has no positive modulus or no snapshot lies strictly above the minimum.
fn margin_checks(run: &FlowRun, checks: &mut Vec<Check>) {
    let kernel_m = match run.kernel_m {
        Some(m) => m,
        None => return,
    };
    let rate = match margin_rate(&run.potential, kernel_m) {
        Some(r) => r,
        None => return,
    };
    let est = match LojaEstimate::from_gradient(0.5, rate.sqrt(), run.functional.min_value()) {
        Ok(e) => e,
        Err(_) => return,
    };
    let (grad_name, func_name) = if kernel_m == 1.0 {
        ("lsi_margin", "talagrand_margin")
    } else {
        ("gn_margin", "ohta_margin")
    };
    let traj = &run.traj;
    let gradient_samples: Vec<(f64, f64)> =
        traj.energies.iter().cloned().zip(traj.slopes.iter().cloned()).collect();
    if let Ok(report) = gradient_margin(&gradient_samples, &est, MARGIN_TOL) {
        checks.push(Check::new(
            grad_name,
            report.pass,
            format!("min margin = {} at snapshot {}", report.min_margin, report.worst),
        ));
    }
    let functional_samples: Vec<(f64, f64)> = traj
        .energies
        .iter()
        .cloned()
        .zip(traj.distances.iter().cloned())
        .filter(|(_, d)| d.is_finite())
        .collect();
    if let Ok(report) = functional_margin(&functional_samples, &est, MARGIN_TOL) {
        checks.push(Check::new(
            func_name,
            report.pass,
            format!("min margin = {} at snapshot {}", report.min_margin, report.worst),
        ));
    }
}

fn trajectory_checks(traj: &Trajectory) -> Vec<Check> {
    let mut checks = Vec::new();

    let mass_err = traj
        .states
        .iter()
        .map(|s| (s.mass() - 1.0).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check::new(
        "mass_conservation",
        mass_err <= 1e-10,
        format!("max |mass - 1| = {mass_err:e}"),
    ));

    let positive = traj.states.iter().all(|s| match s {
        Measure::Grid(g) => g.density().iter().all(|d| *d >= 0.0),
        Measure::Atomic(a) => a.weights().iter().all(|w| *w > 0.0),
    });
    checks.push(Check::new(
        "positivity",
        positive,
        if positive { "all snapshots nonnegative".into() } else { "negative values found".into() },
    ));

    let slack = 1e-10 * (1.0 + traj.energies.first().map_or(0.0, |j| j.abs()));
    let mut worst_rise = f64::NEG_INFINITY;
    for w in traj.energies.windows(2) {
        worst_rise = worst_rise.max(w[1] - w[0]);
    }
    let monotone = traj.energies.len() < 2 || worst_rise <= slack;
    checks.push(Check::new(
        "energy_monotone",
        monotone,
        if traj.energies.len() < 2 {
            "single snapshot".into()
        } else {
            format!("worst energy rise = {worst_rise:e}")
        },
    ));

    let last_t = traj.times.last().copied().unwrap_or(0.0);
    checks.push(Check::new(
        "completed",
        traj.complete,
        match traj.stabilized_at {
            Some(ts) if traj.complete => format!("stabilized at t = {ts}"),
            _ if traj.complete => format!("reached t = {last_t}"),
            _ => format!("max_steps exhausted at t = {last_t}"),
        },
    ));

    checks
}

fn run_flow(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Summary> {
    let mut run = execute_flow(cfg, out_dir)?;
    let mut checks = std::mem::take(&mut run.checks);
    let mut artifacts = std::mem::take(&mut run.artifacts);
    margin_checks(&run, &mut checks);
    let traj = &run.traj;

    let mut bounds = None;
    if let Some(spec) = &cfg.loja {
        let est = build_estimate(spec, run.functional.min_value())?;
        let tol = spec.tolerance.unwrap_or(0.05);
        let report = verify_bounds(traj, &est, tol).map_err(numerical_err)?;
        write_text(&out_dir.join("bounds.csv"), &report.to_csv())?;
        artifacts.push("bounds.csv".into());
        checks.push(Check::new(
            "rate_bounds",
            report.pass(),
            format!(
                "{} violations on {} snapshots (tolerance {tol})",
                report.violations.len(),
                report.times.len()
            ),
        ));
        bounds = Some(report);
    }

    if cfg.svg.unwrap_or(false) {
        let mut series = Vec::new();
        match &bounds {
            Some(report) => {
                series.push(svg::Series {
                    label: "J gap".into(),
                    points: report.times.iter().cloned().zip(report.j_gaps.iter().cloned()).collect(),
                });
                series.push(svg::Series {
                    label: "bound".into(),
                    points: report
                        .times
                        .iter()
                        .cloned()
                        .zip(report.j_bounds.iter().cloned())
                        .collect(),
                });
            }
            None => series.push(svg::Series {
                label: "J".into(),
                points: traj.times.iter().cloned().zip(traj.energies.iter().cloned()).collect(),
            }),
        }
        let svg_text = svg::line_plot("t", "J", &series, log_scale_sensible(&series));
        write_text(&out_dir.join("plot.svg"), &svg_text)?;
        artifacts.push("plot.svg".into());
    }

    Ok(Summary::assemble(Kind::Flow, seed, checks, None, artifacts))
}

fn log_scale_sensible(series: &[svg::Series]) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for (_, y) in &s.points {
            if !y.is_finite() || *y <= 0.0 {
                return false;
            }
            lo = lo.min(*y);
            hi = hi.max(*y);
        }
    }
    lo > 0.0 && hi / lo > 100.0
}

fn run_inequality(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Summary> {
    let grid = build_grid(cfg.grid.as_ref().expect("validated"))?;
    let potential = build_potential(cfg, Some(grid))?;
    let reference = gibbs_profile(&potential, grid).map_err(config_err)?.profile;
    let functional =
        EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference.clone());

    let est = match &cfg.loja {
        Some(spec) => build_estimate(spec, 0.0)?,
        None => {
            // LSI constant: Holley-Stroock when the potential decomposes as
            // convex + bounded (oscillation 0 reduces it to 2K)
            let rate = if let Some(d) = potential.decomposition().filter(|d| d.k > 0.0) {
                holley_stroock_rate(d.k, potential.osc().map_err(config_err)?)
            } else if let Some(k) = potential.k() {
                2.0 * k
            } else {
                return Err(RunError::Config(
                    "no built-in log-Sobolev rate for this potential; give loja.c_g".into(),
                ));
            };
            LojaEstimate::from_gradient(0.5, rate.sqrt(), 0.0).map_err(config_err)?
        }
    };
    let tol = cfg.loja.and_then(|l| l.tolerance).unwrap_or(1e-3);
    let count = cfg.samples.unwrap_or(100);

    let densities = samples::perturbed_gaussians(grid, count, seed)?;
    let mut gradient_samples = Vec::with_capacity(count);
    let mut functional_samples = Vec::with_capacity(count);
    let mut rows = String::from("sample,J,slope,w2\n");
    for (i, rho) in densities.iter().enumerate() {
        let mu = Measure::Grid(rho.clone());
        let j = functional
            .energy(&mu)
            .map_err(numerical_err)?
            .value()
            .ok_or_else(|| RunError::Numerical(format!("sample {i}: infinite energy")))?;
        let slope = functional.slope(&mu).map_err(numerical_err)?;
        let w2 = w2_grid(rho, &reference);
        gradient_samples.push((j, slope));
        functional_samples.push((j, w2));
        rows.push_str(&format!(
            "{i},{},{},{}\n",
            format_sig17(j),
            format_sig17(slope),
            format_sig17(w2)
        ));
    }
    write_text(&out_dir.join("samples.csv"), &rows)?;

    let grad = gradient_margin(&gradient_samples, &est, tol).map_err(numerical_err)?;
    let func = functional_margin(&functional_samples, &est, tol).map_err(numerical_err)?;
    write_text(&out_dir.join("gradient.csv"), &grad.to_csv())?;
    write_text(&out_dir.join("functional.csv"), &func.to_csv())?;

    let checks = vec![
        Check::new(
            "gradient_inequality",
            grad.pass,
            format!("min margin = {} at sample {}", grad.min_margin, grad.worst),
        ),
        Check::new(
            "functional_inequality",
            func.pass,
            format!("min margin = {} at sample {}", func.min_margin, func.worst),
        ),
    ];
    let artifacts =
        vec!["samples.csv".into(), "gradient.csv".into(), "functional.csv".into()];
    Ok(Summary::assemble(Kind::Inequality, seed, checks, Some(Estimates::from(&est)), artifacts))
}

fn run_estimate(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Summary> {
    let spec = cfg.estimate.clone().unwrap_or_default();
    match spec.source.as_str() {
        "dirac_path" => run_estimate_dirac(&spec, out_dir, seed),
        "trajectory" => run_estimate_trajectory(cfg, out_dir, seed),
        other => Err(RunError::Config(format!("unknown estimate source '{other}'"))),
    }
}

fn run_estimate_dirac(spec: &EstimateSpec, out_dir: &Path, seed: u64) -> Result<Summary> {
    let t_min = spec.t_min.unwrap_or(0.1);
    let t_max = spec.t_max.unwrap_or(0.9);
    let count = spec.count.unwrap_or(9);
    let pairs = samples::dirac_path(t_min, t_max, count)?;

    let mut rows = String::from("sample,J,w2\n");
    for (i, (j, w)) in pairs.iter().enumerate() {
        rows.push_str(&format!("{i},{},{}\n", format_sig17(*j), format_sig17(*w)));
    }
    write_text(&out_dir.join("samples.csv"), &rows)?;

    let fit = fit_exponent(&pairs, 0.0, FitKind::Functional).map_err(numerical_err)?;
    let checks = vec![Check::new(
        "fit",
        true,
        format!("theta = {}, c_f = {}, residual = {:e}", fit.theta, fit.c_f, fit.residual),
    )];
    Ok(Summary::assemble(
        Kind::Estimate,
        seed,
        checks,
        Some(Estimates::from(&fit)),
        vec!["samples.csv".into()],
    ))
}

fn run_estimate_trajectory(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Summary> {
    let mut run = execute_flow(cfg, out_dir)?;
    let mut checks = std::mem::take(&mut run.checks);
    let artifacts = std::mem::take(&mut run.artifacts);
    let traj = &run.traj;
    let jhat = run.functional.min_value();
    let pairs: Vec<(f64, f64)> =
        traj.energies.iter().cloned().zip(traj.slopes.iter().cloned()).collect();
    let fit = fit_exponent(&pairs, jhat, FitKind::Gradient).map_err(numerical_err)?;
    checks.push(Check::new(
        "fit",
        true,
        format!(
            "theta = {}, c_g = {} on {} snapshots, residual = {:e}",
            fit.theta, fit.c_g, fit.sample_count, fit.residual
        ),
    ));
    Ok(Summary::assemble(Kind::Estimate, seed, checks, Some(Estimates::from(&fit)), artifacts))
}

// ------------------------------------------------------------------- plot

/// Entry point for `wloja plot`: renders plot.svg from trajectory.csv and,
/// when present, bounds.csv in the run directory.
pub fn plot_dir(dir: &Path) -> Result<u8> {
    let traj = read_csv_columns(&dir.join("trajectory.csv"), "t,J,slope,w2,dissipation")?;
    let bounds_path = dir.join("bounds.csv");
    let mut series = Vec::new();
    if bounds_path.exists() {
        let b = read_csv_columns(&bounds_path, "t,J,J_bound,w2,w2_bound")?;
        series.push(svg::Series {
            label: "J gap".into(),
            points: b.iter().map(|r| (r[0], r[1])).collect(),
        });
        series.push(svg::Series {
            label: "bound".into(),
            points: b.iter().map(|r| (r[0], r[2])).collect(),
        });
    } else {
        series.push(svg::Series {
            label: "J".into(),
            points: traj.iter().map(|r| (r[0], r[1])).collect(),
        });
    }
    let text = svg::line_plot("t", "J", &series, log_scale_sensible(&series));
    write_text(&dir.join("plot.svg"), &text)?;
    Ok(0)
}

fn read_csv_columns(path: &Path, expect_header: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    if header != expect_header {
        return Err(RunError::Config(format!(
            "{}: header '{header}' (expected '{expect_header}')",
            path.display()
        )));
    }
    let cols = expect_header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            RunError::Config(format!("{}: row {}: {e}", path.display(), i + 2))
        })?;
        if row.len() != cols {
            return Err(RunError::Config(format!(
                "{}: row {} has {} fields, expected {cols}",
                path.display(),
                i + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}
