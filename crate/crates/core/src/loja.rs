//! Instance-level verification of the two Łojasiewicz properties
//!
//!   gradient:    c_g·(J[ρ] − Ĵ)^{1−θ} ≤ |∂J|[ρ]      for Ĵ < J[ρ] < r₀,
//!   functional:  c_f·W₂(ρ, Argmin J)^{1/θ} ≤ J[ρ] − Ĵ,
//!
//! together with the constant conversions between them, empirical exponent
//! fitting, the three convergence-rate regimes implied by the gradient
//! inequality, named functional inequalities (log-Sobolev/Talagrand for
//! m = 1, Gagliardo-Nirenberg/Ohta-Takatsu for m > 1) in energy-gap form,
//! and the lifting of pointwise gradient inequalities from the base space
//! to measures.
//!
//! Estimated constants are per-sample-set statements only: a fit over one
//! trajectory or family certifies nothing about other measures.

use crate::error::{Error, Result};
use crate::flows::Trajectory;
use crate::functionals::{gibbs_profile, Energy, EnergyFunctional, EntropyKernel};
use crate::measures::{GridMeasure, Measure};
use crate::numeric::{format_sig17, kahan_sum, ols};
use crate::potentials::Potential;
use crate::transport::w2_grid;

/// Tolerance for analytic-equality checks on n = 800-grade grids, where the
/// O(Δx) slope discretization dominates.
pub const ANALYTIC_TOL: f64 = 1e-3;

/// Energy gaps below this are treated as "at the minimum" and excluded from
/// log-log fits.
pub const FIT_GAP_FLOOR: f64 = 1e-12;

/// Łojasiewicz data for one functional on one sample set: exponent θ,
/// gradient constant c_g, functional constant c_f, validity radius r₀, and
/// minimum value Ĵ, plus fit diagnostics when estimated from data.
#[derive(Debug, Clone)]
pub struct LojaEstimate {
    pub theta: f64,
    pub c_g: f64,
    pub c_f: f64,
    pub r0: f64,
    pub jhat: f64,
    /// Max absolute log-log regression residual; 0 for hand-built estimates.
    pub residual: f64,
    pub sample_count: usize,
}

impl LojaEstimate {
    pub fn new(theta: f64, c_g: f64, c_f: f64, jhat: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Loja(format!("theta must lie in (0,1], got {theta}")));
        }
        if !(c_g >= 0.0) || !(c_f >= 0.0) {
            return Err(Error::Loja(format!(
                "constants must be nonnegative, got c_g = {c_g}, c_f = {c_f}"
            )));
        }
        if !jhat.is_finite() {
            return Err(Error::Loja(format!("jhat must be finite, got {jhat}")));
        }
        Ok(LojaEstimate {
            theta,
            c_g,
            c_f,
            r0: f64::INFINITY,
            jhat,
            residual: 0.0,
            sample_count: 0,
        })
    }

    /// Estimate from the gradient side; c_f filled in by conversion.
    pub fn from_gradient(theta: f64, c_g: f64, jhat: f64) -> Result<Self> {
        let c_f = convert_constants(Direction::GradientToFunctional, theta, c_g);
        LojaEstimate::new(theta, c_g, c_f, jhat)
    }

    /// Estimate from the functional side; c_g filled in by conversion.
    pub fn from_functional(theta: f64, c_f: f64, jhat: f64) -> Result<Self> {
        let c_g = convert_constants(Direction::FunctionalToGradient, theta, c_f);
        LojaEstimate::new(theta, c_g, c_f, jhat)
    }

    pub fn with_r0(mut self, r0: f64) -> Result<Self> {
        if !(r0 > self.jhat) {
            return Err(Error::Loja(format!(
                "validity radius must exceed jhat = {}, got {r0}",
                self.jhat
            )));
        }
        self.r0 = r0;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    GradientToFunctional,
    FunctionalToGradient,
}

/// c_f = (θ·c_g)^{1/θ} one way, c_g = c_f^θ the other; at θ = 1 the two
/// constants coincide and the round trip is the identity.
pub fn convert_constants(direction: Direction, theta: f64, c: f64) -> f64 {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0,1], got {theta}");
    assert!(c >= 0.0, "constant must be nonnegative, got {c}");
    match direction {
        Direction::GradientToFunctional => (theta * c).powf(1.0 / theta),
        Direction::FunctionalToGradient => c.powf(theta),
    }
}

/// Per-sample inequality check: margins are lhs − rhs for an inequality read
/// as lhs ≥ rhs, so a sample passes when its margin is ≥ −tolerance.
/// Indices (`worst`) refer to the eligible samples in input order; skipped
/// samples are counted but not stored.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub label: String,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub worst: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub skipped: usize,
}

impl InequalityReport {
    fn build(
        label: &str,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        tolerance: f64,
        skipped: usize,
    ) -> Result<Self> {
        if lhs.is_empty() {
            return Err(Error::Loja(format!("{label}: no eligible samples")));
        }
        let margins: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
        let (worst, min_margin) = margins
            .iter()
            .cloned()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        Ok(InequalityReport {
            label: label.to_string(),
            lhs,
            rhs,
            margins,
            min_margin,
            worst,
            tolerance,
            pass: min_margin >= -tolerance,
            skipped,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,lhs,rhs,margin\n");
        for i in 0..self.margins.len() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                format_sig17(self.lhs[i]),
                format_sig17(self.rhs[i]),
                format_sig17(self.margins[i]),
            ));
        }
        out.push_str(&format!(
            "# {} pass={} min_margin={} worst={} skipped={} tolerance={}\n",
            self.label,
            self.pass,
            format_sig17(self.min_margin),
            self.worst,
            self.skipped,
            format_sig17(self.tolerance),
        ));
        out
    }
}

/// Checks slope ≥ c_g·(J − Ĵ)^{1−θ} on samples (J, slope). Samples outside
/// Ĵ < J < r₀ are skipped and counted.
pub fn gradient_margin(
    samples: &[(f64, f64)],
    est: &LojaEstimate,
    tolerance: f64,
) -> Result<InequalityReport> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut skipped = 0usize;
    for (j, slope) in samples {
        if !(*j > est.jhat && *j < est.r0) {
            skipped += 1;
            continue;
        }
        lhs.push(*slope);
        rhs.push(est.c_g * (j - est.jhat).powf(1.0 - est.theta));
    }
    InequalityReport::build("gradient", lhs, rhs, tolerance, skipped)
}

/// Checks J − Ĵ ≥ c_f·W₂^{1/θ} on samples (J, W₂-to-argmin). Same
/// eligibility window as the gradient check.
pub fn functional_margin(
    samples: &[(f64, f64)],
    est: &LojaEstimate,
    tolerance: f64,
) -> Result<InequalityReport> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut skipped = 0usize;
    for (j, w2) in samples {
        if !(*j > est.jhat && *j < est.r0) {
            skipped += 1;
            continue;
        }
        lhs.push(j - est.jhat);
        rhs.push(est.c_f * w2.powf(1.0 / est.theta));
    }
    InequalityReport::build("functional", lhs, rhs, tolerance, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    /// Samples (J, slope): log slope = log c_g + (1−θ)·log(J − Ĵ).
    Gradient,
    /// Samples (J, W₂): log(J − Ĵ) = log c_f + (1/θ)·log W₂.
    Functional,
}

/// Ordinary least squares in log-log coordinates. Samples with gap ≤
/// [`FIT_GAP_FLOOR`] or nonpositive second coordinate are excluded; at least
/// 5 must remain.
pub fn fit_exponent(samples: &[(f64, f64)], jhat: f64, kind: FitKind) -> Result<LojaEstimate> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, second) in samples {
        let gap = j - jhat;
        if gap <= FIT_GAP_FLOOR || *second <= 0.0 {
            continue;
        }
        match kind {
            FitKind::Gradient => {
                xs.push(gap.ln());
                ys.push(second.ln());
            }
            FitKind::Functional => {
                xs.push(second.ln());
                ys.push(gap.ln());
            }
        }
    }
    if xs.len() < 5 {
        return Err(Error::Loja(format!(
            "exponent fit needs at least 5 eligible samples, got {}",
            xs.len()
        )));
    }
    let xbar = kahan_sum(xs.iter().cloned()) / xs.len() as f64;
    let sxx = kahan_sum(xs.iter().map(|x| (x - xbar) * (x - xbar)));
    if sxx < 1e-20 {
        return Err(Error::Loja("degenerate samples: zero variance in the log abscissa".into()));
    }
    let (a, b, residual) = ols(&xs, &ys);
    let est = match kind {
        FitKind::Gradient => {
            let theta = 1.0 - b;
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::Loja(format!(
                    "fitted exponent {theta} lies outside (0,1]; samples do not follow a \
                     Łojasiewicz power law"
                )));
            }
            LojaEstimate::from_gradient(theta, a.exp(), jhat)?
        }
        FitKind::Functional => {
            if !(b >= 1.0) {
                return Err(Error::Loja(format!(
                    "fitted log-log slope {b} implies an exponent outside (0,1]"
                )));
            }
            LojaEstimate::from_functional(1.0 / b, a.exp(), jhat)?
        }
    };
    Ok(LojaEstimate { residual, sample_count: xs.len(), ..est })
}

/// Rate bounds implied by the gradient inequality: returns the bound on
/// J(t) − Ĵ, the bound on W₂(ρ(t), ρ∞), and the stabilization time T for
/// θ > 1/2 (bounds clamp to 0 from T on). The W₂ bound is 1/(c_g·θ) times
/// the gap bound to the power θ in every regime.
pub fn rate_bound(theta: f64, c_g: f64, j0: f64, jhat: f64, t: f64) -> (f64, f64, Option<f64>) {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0,1], got {theta}");
    assert!(c_g > 0.0, "rate bounds need c_g > 0, got {c_g}");
    assert!(j0 > jhat, "rate bounds need an initial gap, got J0 = {j0}, jhat = {jhat}");
    assert!(t >= 0.0, "time must be nonnegative, got {t}");
    let gap0 = j0 - jhat;
    if theta == 0.5 {
        let j = gap0 * (-c_g * c_g * t).exp();
        let w2 = 2.0 / c_g * gap0.sqrt() * (-c_g * c_g * t / 2.0).exp();
        (j, w2, None)
    } else if theta < 0.5 {
        let base = gap0.powf(2.0 * theta - 1.0) + c_g * c_g * (1.0 - 2.0 * theta) * t;
        let j = base.powf(-1.0 / (1.0 - 2.0 * theta));
        let w2 = base.powf(-theta / (1.0 - 2.0 * theta)) / (c_g * theta);
        (j, w2, None)
    } else {
        let stop = gap0.powf(2.0 * theta - 1.0) / (c_g * c_g * (2.0 * theta - 1.0));
        if t >= stop {
            (0.0, 0.0, Some(stop))
        } else {
            let base = gap0.powf(2.0 * theta - 1.0) - c_g * c_g * (2.0 * theta - 1.0) * t;
            let j = base.powf(1.0 / (2.0 * theta - 1.0));
            let w2 = base.powf(theta / (2.0 * theta - 1.0)) / (c_g * theta);
            (j, w2, Some(stop))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// θ < 1/2: polynomial decay.
    Polynomial,
    /// θ = 1/2: exponential decay.
    Exponential,
    /// θ > 1/2: finite-time stabilization.
    FiniteTime,
}

/// Snapshot-by-snapshot comparison of a trajectory against the rate bounds.
/// `j_gaps` are measured J_k − Ĵ and `j_bounds` the theorem's bound on the
/// same gap; `violations` lists snapshot indices where a measured value
/// exceeds its bound by more than tolerance·(1 + bound).
#[derive(Debug, Clone)]
pub struct RateBoundReport {
    pub regime: Regime,
    pub times: Vec<f64>,
    pub j_gaps: Vec<f64>,
    pub j_bounds: Vec<f64>,
    pub w2s: Vec<f64>,
    pub w2_bounds: Vec<f64>,
    pub stop_time: Option<f64>,
    pub violations: Vec<usize>,
    pub tolerance: f64,
}

impl RateBoundReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,J,J_bound,w2,w2_bound\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_sig17(self.times[k]),
                format_sig17(self.j_gaps[k]),
                format_sig17(self.j_bounds[k]),
                format_sig17(self.w2s[k]),
                format_sig17(self.w2_bounds[k]),
            ));
        }
        out
    }
}

/// Checks every snapshot of `traj` against the rate bounds seeded with the
/// trajectory's own initial gap.
pub fn verify_bounds(
    traj: &Trajectory,
    est: &LojaEstimate,
    tolerance: f64,
) -> Result<RateBoundReport> {
    if !(est.c_g > 0.0) {
        return Err(Error::Loja("rate-bound verification needs c_g > 0".into()));
    }
    if traj.is_empty() {
        return Err(Error::Loja("empty trajectory".into()));
    }
    let j0 = traj.energies[0];
    if !(j0 > est.jhat) {
        return Err(Error::Loja(format!(
            "trajectory starts at gap {} ≤ 0; nothing to bound",
            j0 - est.jhat
        )));
    }
    let regime = if est.theta == 0.5 {
        Regime::Exponential
    } else if est.theta < 0.5 {
        Regime::Polynomial
    } else {
        Regime::FiniteTime
    };
    let mut report = RateBoundReport {
        regime,
        times: traj.times.clone(),
        j_gaps: Vec::with_capacity(traj.len()),
        j_bounds: Vec::with_capacity(traj.len()),
        w2s: traj.distances.clone(),
        w2_bounds: Vec::with_capacity(traj.len()),
        stop_time: None,
        violations: Vec::new(),
        tolerance,
    };
    for k in 0..traj.len() {
        let (jb, wb, stop) = rate_bound(est.theta, est.c_g, j0, est.jhat, traj.times[k]);
        report.stop_time = stop;
        let gap = traj.energies[k] - est.jhat;
        report.j_gaps.push(gap);
        report.j_bounds.push(jb);
        report.w2_bounds.push(wb);
        let j_bad = gap - jb > tolerance * (1.0 + jb);
        let w_bad = traj.distances[k] - wb > tolerance * (1.0 + wb);
        if j_bad || w_bad {
            report.violations.push(k);
        }
    }
    Ok(report)
}

/// Log-Sobolev and Talagrand margins in gap form for the relative entropy
/// with respect to the Gibbs profile of a K-convex potential:
/// Fisher ≥ 2K·Entropy, and Entropy ≥ (K/2)·W₂². Reports are
/// (log-Sobolev, Talagrand), single-sample, at [`ANALYTIC_TOL`].
pub fn lsi_talagrand_report(
    rho: &GridMeasure,
    v: &Potential,
) -> Result<(InequalityReport, InequalityReport)> {
    let k = v
        .k()
        .ok_or_else(|| Error::Loja("log-Sobolev needs a potential with modulus K > 0".into()))?;
    let reference = gibbs_profile(v, rho.grid())?.profile;
    let functional = EnergyFunctional::relative_internal(EntropyKernel::boltzmann(), reference.clone());
    let state = Measure::Grid(rho.clone());
    let entropy = match functional.energy(&state)? {
        Energy::Finite(e) => e,
        Energy::Infinite => {
            return Err(Error::Loja("relative entropy is infinite for this sample".into()));
        }
    };
    let slope = functional.slope(&state)?;
    let fisher = slope * slope;
    let w2 = w2_grid(rho, &reference);
    let lsi = InequalityReport::build("lsi", vec![fisher], vec![2.0 * k * entropy], ANALYTIC_TOL, 0)?;
    let talagrand =
        InequalityReport::build("talagrand", vec![entropy], vec![k / 2.0 * w2 * w2], ANALYTIC_TOL, 0)?;
    Ok((lsi, talagrand))
}

/// Gagliardo-Nirenberg and Ohta-Takatsu margins in gap form for the
/// internal-plus-potential energy with a K-convex potential and m > 1:
/// slope² ≥ 2K·(J − Ĵ), and J − Ĵ ≥ (K/2)·W₂², with Ĵ the energy of the
/// Barenblatt profile. Reports are (Gagliardo-Nirenberg, Ohta-Takatsu).
pub fn gn_ohta_report(
    rho: &GridMeasure,
    v: &Potential,
    m: f64,
) -> Result<(InequalityReport, InequalityReport)> {
    let k = v.k().ok_or_else(|| {
        Error::Loja("Gagliardo-Nirenberg needs a potential with modulus K > 0".into())
    })?;
    let kernel = EntropyKernel::power(m)?;
    let functional = EnergyFunctional::internal_plus_potential(kernel, v.clone(), rho.grid())?;
    let equilibrium = functional.equilibrium().expect("power kernel sets it").clone();
    let state = Measure::Grid(rho.clone());
    let gap = match functional.energy(&state)? {
        Energy::Finite(e) => e - functional.min_value(),
        Energy::Infinite => return Err(Error::Loja("energy is infinite for this sample".into())),
    };
    let slope = functional.slope(&state)?;
    let w2 = w2_grid(rho, &equilibrium);
    let gn =
        InequalityReport::build("gn", vec![slope * slope], vec![2.0 * k * gap], ANALYTIC_TOL, 0)?;
    let ohta =
        InequalityReport::build("ohta", vec![gap], vec![k / 2.0 * w2 * w2], ANALYTIC_TOL, 0)?;
    Ok((gn, ohta))
}

/// Exponent surviving the lift from a pointwise inequality on ℝ^d to the
/// potential energy on measures: θ for θ ≤ 1/2, else θ(1/2 + 1/d)/(θ + 1/d),
/// which is strictly below θ.
pub fn lifted_exponent(theta: f64, d: u32) -> f64 {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0,1], got {theta}");
    assert!(d >= 1, "dimension must be at least 1");
    if theta <= 0.5 {
        theta
    } else {
        let invd = 1.0 / d as f64;
        theta * (0.5 + invd) / (theta + invd)
    }
}

/// Result of [`lift_gradient_check`]: the pointwise premise on the support
/// of ρ, and the lifted conclusion — asserted only when the premise holds.
#[derive(Debug, Clone)]
pub struct LiftReport {
    pub premise: InequalityReport,
    pub conclusion: Option<InequalityReport>,
}

/// Verifies on the support of ρ the pointwise inequality
/// |V(x) − V̄|^{1−θ} ≤ c·|V'(x)|, and — when it holds — the lifted
/// conclusion |J[ρ] − V̄|^{1−θ} ≤ c·‖∂J‖_ρ for the potential energy
/// J[ρ] = ∫V dρ. Margins are c·|gradient| − |value gap|^{1−θ}.
pub fn lift_gradient_check(
    rho: &Measure,
    v: &Potential,
    vbar: f64,
    theta: f64,
    c: f64,
    tolerance: f64,
) -> Result<LiftReport> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Loja(format!("theta must lie in (0,1], got {theta}")));
    }
    if !(c >= 0.0) {
        return Err(Error::Loja(format!("lift constant must be nonnegative, got {c}")));
    }
    let support: Vec<f64> = match rho {
        Measure::Atomic(a) => a.positions().to_vec(),
        Measure::Grid(g) => {
            let eps = 1e-12 * g.density().iter().cloned().fold(0.0f64, f64::max);
            (0..g.grid().n)
                .filter(|i| g.density()[*i] >= eps)
                .map(|i| g.grid().center(i))
                .collect()
        }
    };
    let lhs: Vec<f64> = support.iter().map(|x| c * v.derivative(*x).abs()).collect();
    let rhs: Vec<f64> =
        support.iter().map(|x| (v.value(*x) - vbar).abs().powf(1.0 - theta)).collect();
    let premise = InequalityReport::build("lift premise", lhs, rhs, tolerance, 0)?;
    if !premise.pass {
        return Ok(LiftReport { premise, conclusion: None });
    }
    let functional = EnergyFunctional::potential_only(v.clone());
    let j = functional.energy(rho)?.value().expect("potential energies are finite");
    let norm = functional.slope(rho)?;
    let conclusion = InequalityReport::build(
        "lift conclusion",
        vec![c * norm],
        vec![(j - vbar).abs().powf(1.0 - theta)],
        tolerance,
        0,
    )?;
    Ok(LiftReport { premise, conclusion: Some(conclusion) })
}
