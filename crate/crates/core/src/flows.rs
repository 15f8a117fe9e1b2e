//! Explicit finite-volume integration of the gradient flows
//! dρ/dt = Δρ^m + div(ρ∇V) on grids, and the potential flow ẋ = −V'(x) on
//! atoms, with trajectory diagnostics (energy, slope, distance to
//! equilibrium, dissipation).
//!
//! The interface flux is written in entropy-variable form
//! F = −ρ_up·Δξ/Δx with ξ = φ(ρ) + V, where φ(ρ) = log ρ for m = 1 and
//! φ(ρ) = m/(m−1)·ρ^{m−1} for m > 1. This is the same upwind flux as the
//! Kirchhoff form −(Δρ^m/Δx + ρ_up·ΔV/Δx) to scheme order, but the discrete
//! Gibbs and Barenblatt profiles make ξ exactly constant, so equilibria are
//! stationary to round-off instead of to O(Δx) — which is what the
//! stationarity tolerances here require. Upwinding by the sign of the
//! interface velocity v = −Δξ/Δx keeps densities nonnegative under the CFL
//! bounds, and flux differencing conserves mass to round-off.

use crate::error::{Error, Result};
use crate::functionals::{Energy, EnergyFunctional, FLOOR_REL};
use crate::measures::{AtomicMeasure, GridMeasure, Measure};
use crate::numeric::format_sig17;
use crate::potentials::{ArgminSet, Potential};
use crate::transport::{w2_atomic, w2_grid};

/// Energy-gap threshold below which a run is declared stabilized.
pub const GAP_TOL: f64 = 1e-12;

/// Default atomic-flow step when `fixed_dt` is not set.
pub const ATOMIC_DT: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct SolverControls {
    pub t_end: f64,
    pub cfl: f64,
    pub snapshot_stride: usize,
    pub max_steps: usize,
    /// Vacuum floor relative to the max density, as in the functionals.
    pub floor_rel: f64,
    /// Expert override: fixed step size. Grid flows trust it to satisfy the
    /// CFL bounds (a violation surfaces as a negative-density error); the
    /// atomic flow uses it as the integrator step.
    pub fixed_dt: Option<f64>,
}

impl SolverControls {
    pub fn new(t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Flow(format!("t_end must be positive, got {t_end}")));
        }
        Ok(SolverControls {
            t_end,
            cfl: 0.4,
            snapshot_stride: 100,
            max_steps: 2_000_000,
            floor_rel: FLOOR_REL,
            fixed_dt: None,
        })
    }

    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(Error::Flow(format!("cfl must lie in (0,1), got {cfl}")));
        }
        self.cfl = cfl;
        Ok(self)
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Flow("snapshot_stride must be at least 1".into()));
        }
        self.snapshot_stride = stride;
        Ok(self)
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Flow("max_steps must be at least 1".into()));
        }
        self.max_steps = max_steps;
        Ok(self)
    }

    pub fn with_fixed_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Flow(format!("fixed_dt must be positive, got {dt}")));
        }
        self.fixed_dt = Some(dt);
        Ok(self)
    }
}

/// Snapshot record of one run. `energies` are raw values of the driving
/// functional; `distances` are w2 to the declared equilibrium, or to the
/// final state when no equilibrium is known; `dissipations[k]` estimates
/// −ΔJ/Δt over the preceding snapshot interval (0 at k = 0).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Measure>,
    pub energies: Vec<f64>,
    pub slopes: Vec<f64>,
    pub distances: Vec<f64>,
    pub dissipations: Vec<f64>,
    /// False when max_steps ran out before t_end.
    pub complete: bool,
    /// Time at which the run froze: energy gap below [`GAP_TOL`] (grid) or
    /// every atom frozen (atomic).
    pub stabilized_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Measure {
        self.states.last().expect("trajectories hold at least the initial snapshot")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,J,slope,w2,dissipation\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_sig17(self.times[k]),
                format_sig17(self.energies[k]),
                format_sig17(self.slopes[k]),
                format_sig17(self.distances[k]),
                format_sig17(self.dissipations[k]),
            ));
        }
        out
    }
}

/// φ(ρ) = log ρ (m = 1) or m/(m−1)·ρ^{m−1} (m > 1). Only exact vacuum is
/// substituted (by `vacuum`, the φ-value standing in for ρ = 0 when m = 1):
/// flooring positive cells would unbalance equilibrium tails.
fn phi(r: f64, m: f64, vacuum: f64) -> f64 {
    if m == 1.0 {
        if r > 0.0 {
            r.ln()
        } else {
            vacuum
        }
    } else {
        m / (m - 1.0) * r.powf(m - 1.0)
    }
}

/// Interface velocities v_{i+1/2} = −Δξ/Δx at the n−1 interior interfaces.
fn interface_velocities(
    density: &[f64],
    grid: &crate::measures::Grid1D,
    v: &Potential,
    m: f64,
    floor_rel: f64,
) -> Vec<f64> {
    let dx = grid.dx();
    let max_rho = density.iter().cloned().fold(0.0f64, f64::max);
    let vacuum = (floor_rel * max_rho).max(f64::MIN_POSITIVE).ln();
    let xi: Vec<f64> =
        (0..grid.n).map(|i| phi(density[i], m, vacuum) + v.value(grid.center(i))).collect();
    (0..grid.n - 1).map(|i| -(xi[i + 1] - xi[i]) / dx).collect()
}

fn apply_fluxes(
    density: &[f64],
    vel: &[f64],
    dx: f64,
    dt: f64,
) -> std::result::Result<Vec<f64>, usize> {
    let n = density.len();
    // F_{i+1/2} = rho_up * v_{i+1/2}; no-flux boundaries
    let flux: Vec<f64> = (0..n - 1)
        .map(|i| if vel[i] >= 0.0 { density[i] * vel[i] } else { density[i + 1] * vel[i] })
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f_left = if i == 0 { 0.0 } else { flux[i - 1] };
        let f_right = if i == n - 1 { 0.0 } else { flux[i] };
        let next = density[i] - dt / dx * (f_right - f_left);
        if next < 0.0 {
            return Err(i);
        }
        out.push(next);
    }
    Ok(out)
}

/// One conservative explicit step of dρ/dt = Δρ^m + div(ρ∇V) with no-flux
/// boundaries. The caller is responsible for a CFL-compatible Δt; a violated
/// bound surfaces as a negative-density error naming the cell.
pub fn fv_step(rho: &GridMeasure, v: &Potential, m: f64, dt: f64) -> Result<GridMeasure> {
    if !(m >= 1.0) {
        return Err(Error::Flow(format!("fv_step needs m >= 1, got {m}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Flow(format!("fv_step needs dt > 0, got {dt}")));
    }
    let grid = rho.grid();
    let vel = interface_velocities(rho.density(), &grid, v, m, FLOOR_REL);
    match apply_fluxes(rho.density(), &vel, grid.dx(), dt) {
        Ok(d) => Ok(GridMeasure::from_conserved(grid, d)),
        Err(cell) => Err(Error::NegativeDensity { step: 0, cell }),
    }
}

/// Largest step allowed by the diffusion bound Δx²/(2·m·max ρ^{m−1}), the
/// drift bound Δx/max|V'|, and the interface-velocity positivity bound.
fn cfl_dt(
    density: &[f64],
    vel: &[f64],
    grid: &crate::measures::Grid1D,
    v: &Potential,
    m: f64,
    cfl: f64,
) -> f64 {
    let dx = grid.dx();
    let max_rho = density.iter().cloned().fold(0.0f64, f64::max);
    let diffusivity = m * max_rho.powf(m - 1.0);
    let mut dt = cfl * dx * dx / (2.0 * diffusivity);
    let max_drift =
        (0..grid.n).map(|i| v.derivative(grid.center(i)).abs()).fold(0.0f64, f64::max);
    if max_drift > 0.0 {
        dt = dt.min(cfl * dx / max_drift);
    }
    let max_vel = vel.iter().map(|w| w.abs()).fold(0.0f64, f64::max);
    if max_vel > 0.0 {
        dt = dt.min(cfl * dx / (2.0 * max_vel));
    }
    dt
}

struct Recorder {
    traj: Trajectory,
    functional: EnergyFunctional,
    equilibrium: Option<GridMeasure>,
}

impl Recorder {
    fn new(functional: EnergyFunctional) -> Self {
        let equilibrium = functional.equilibrium().cloned();
        Recorder {
            traj: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                energies: Vec::new(),
                slopes: Vec::new(),
                distances: Vec::new(),
                dissipations: Vec::new(),
                complete: true,
                stabilized_at: None,
            },
            functional,
            equilibrium,
        }
    }

    /// Records a snapshot and returns the energy gap J − Ĵ.
    fn record(&mut self, t: f64, state: Measure) -> Result<f64> {
        let j = match self.functional.energy(&state)? {
            Energy::Finite(j) => j,
            Energy::Infinite => {
                return Err(Error::Flow(format!("energy became infinite at t = {t}")));
            }
        };
        let slope = self.functional.slope(&state)?;
        let dist = match (&self.equilibrium, &state) {
            (Some(eq), Measure::Grid(g)) => w2_grid(g, eq),
            _ => f64::NAN, // filled in later against the final state
        };
        let dissipation = match self.traj.times.last() {
            Some(prev_t) if t > *prev_t => {
                -(j - self.traj.energies.last().unwrap()) / (t - prev_t)
            }
            _ => 0.0,
        };
        self.traj.times.push(t);
        self.traj.states.push(state);
        self.traj.energies.push(j);
        self.traj.slopes.push(slope);
        self.traj.distances.push(dist);
        self.traj.dissipations.push(dissipation);
        Ok(j - self.functional.min_value())
    }

    fn finish(mut self) -> Trajectory {
        if self.equilibrium.is_none() {
            // distance to the declared limit: the final snapshot
            let last = self.traj.states.last().cloned();
            if let Some(Measure::Atomic(fin)) = last {
                for (d, s) in self.traj.distances.iter_mut().zip(&self.traj.states) {
                    if let Measure::Atomic(a) = s {
                        *d = w2_atomic(a, &fin);
                    }
                }
            }
        }
        self.traj
    }
}

/// Integrates the grid flow driven by (V, m) while reporting diagnostics of
/// `functional`; snapshots every `snapshot_stride` steps. Terminates at
/// t_end, or earlier once the energy gap drops below [`GAP_TOL`] (checked at
/// snapshot resolution); runs out of max_steps with `complete = false`.
pub fn solve(
    rho0: &GridMeasure,
    functional: &EnergyFunctional,
    v: &Potential,
    m: f64,
    controls: &SolverControls,
) -> Result<Trajectory> {
    if !(m >= 1.0) {
        return Err(Error::Flow(format!("grid flows need m >= 1, got {m}")));
    }
    let mut rec = Recorder::new(functional.clone());
    rec.record(0.0, Measure::Grid(rho0.clone()))?;

    let grid = rho0.grid();
    let mut state = rho0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    while t < controls.t_end * (1.0 - 1e-12) {
        if steps == controls.max_steps {
            rec.traj.complete = false;
            break;
        }
        let vel = interface_velocities(state.density(), &grid, v, m, controls.floor_rel);
        let dt_bound = match controls.fixed_dt {
            Some(dt) => dt,
            None => cfl_dt(state.density(), &vel, &grid, v, m, controls.cfl),
        };
        let dt = dt_bound.min(controls.t_end - t);
        if !(dt > 0.0) {
            return Err(Error::Flow(format!("step size degenerated to {dt} at t = {t}")));
        }
        match apply_fluxes(state.density(), &vel, grid.dx(), dt) {
            Ok(d) => state = GridMeasure::from_conserved(grid, d),
            Err(cell) => return Err(Error::NegativeDensity { step: steps + 1, cell }),
        }
        t += dt;
        steps += 1;
        let at_end = t >= controls.t_end * (1.0 - 1e-12);
        if steps % controls.snapshot_stride == 0 || at_end {
            let gap = rec.record(t, Measure::Grid(state.clone()))?;
            if gap < GAP_TOL {
                rec.traj.stabilized_at = Some(t);
                break;
            }
        }
    }
    Ok(rec.finish())
}

/// Integrates ẋ_j = −V'(x_j) for every atom with a fourth-order explicit
/// rule. When an atom's straight-line motion over a step would reach a
/// minimizer of V, it is placed there exactly and frozen — the stationary
/// selection at kinks; without it atoms would chatter around nonsmooth
/// minima. Weights never change.
pub fn atomic_flow(
    mu0: &AtomicMeasure,
    v: &Potential,
    controls: &SolverControls,
) -> Result<Trajectory> {
    let dt = controls.fixed_dt.unwrap_or(ATOMIC_DT);
    let functional = EnergyFunctional::potential_only(v.clone());
    let mut rec = Recorder::new(functional);

    let argmin_points: Vec<f64> = match v.argmin() {
        ArgminSet::Points(ps) => ps,
        ArgminSet::Interval(_, _) => Vec::new(), // V':= 0 there freezes atoms anyway
    };
    let mut positions: Vec<f64> = mu0.positions().to_vec();
    let weights: Vec<f64> = mu0.weights().to_vec();
    let mut frozen = vec![false; positions.len()];
    let mut last_freeze = 0.0f64;

    // atoms that start at a critical point never move
    for (x, fr) in positions.iter().zip(frozen.iter_mut()) {
        if v.derivative(*x) == 0.0 {
            *fr = true;
        }
    }

    let snapshot = |xs: &[f64]| -> Result<Measure> {
        let atoms: Vec<(f64, f64)> = xs.iter().cloned().zip(weights.iter().cloned()).collect();
        Ok(Measure::Atomic(AtomicMeasure::new(atoms)?))
    };

    rec.record(0.0, snapshot(&positions)?)?;
    if frozen.iter().all(|f| *f) {
        rec.traj.stabilized_at = Some(0.0);
        return Ok(rec.finish());
    }

    let total_steps = (controls.t_end / dt).ceil() as usize;
    let mut t = 0.0;
    let mut all_frozen_at: Option<f64> = None;
    for step in 1..=total_steps {
        if step > controls.max_steps {
            rec.traj.complete = false;
            break;
        }
        let h = dt.min(controls.t_end - t);
        for j in 0..positions.len() {
            if frozen[j] {
                continue;
            }
            let x = positions[j];
            let d = v.derivative(x);
            if d == 0.0 {
                frozen[j] = true;
                last_freeze = t;
                continue;
            }
            // event check along the straight-line motion of this step; the
            // slack absorbs round-off when the hit lands on a step boundary
            let hit = argmin_points
                .iter()
                .map(|p| ((x - p) / d, p))
                .filter(|(tau, _)| *tau >= 0.0 && *tau <= h * (1.0 + 1e-9))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((tau, p)) = hit {
                positions[j] = *p;
                frozen[j] = true;
                last_freeze = t + tau;
                continue;
            }
            let k1 = -v.derivative(x);
            let k2 = -v.derivative(x + 0.5 * h * k1);
            let k3 = -v.derivative(x + 0.5 * h * k2);
            let k4 = -v.derivative(x + h * k3);
            positions[j] = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t += h;
        if all_frozen_at.is_none() && frozen.iter().all(|f| *f) {
            all_frozen_at = Some(last_freeze);
        }
        let at_end = step == total_steps;
        if step % controls.snapshot_stride == 0 || at_end || all_frozen_at.is_some() {
            rec.record(t, snapshot(&positions)?)?;
        }
        if let Some(ts) = all_frozen_at {
            rec.traj.stabilized_at = Some(ts);
            break;
        }
    }
    Ok(rec.finish())
}
