//! Entropy-type energies on the line: relative internal energy against a
//! reference density, internal-plus-potential (Fokker-Planck / porous medium
//! free energy), and pure potential energy. Each family exposes the energy
//! value and the metric slope, plus its equilibrium profile when one exists.

use crate::error::{Error, Result};
use crate::measures::{Grid1D, GridMeasure, Measure};
use crate::numeric::{bisect, kahan_sum};
use crate::potentials::Potential;

/// Relative floor: cells where a density falls below `FLOOR_REL · max` are
/// treated as vacuum and excluded from logarithms and divisions.
pub const FLOOR_REL: f64 = 1e-12;

/// Mass allowed outside the support of the reference before the relative
/// energy is declared infinite.
pub const OUTSIDE_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKernel {
    /// f(s) = s·log s
    Boltzmann,
    /// f(s) = (s^m − s)/(m−1)
    Power { m: f64 },
}

impl EntropyKernel {
    pub fn boltzmann() -> Self {
        EntropyKernel::Boltzmann
    }

    pub fn power(m: f64) -> Result<Self> {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::Functional(format!("power kernel needs m > 0, got {m}")));
        }
        if m == 1.0 {
            return Err(Error::Functional(
                "power kernel is undefined at m = 1; use the Boltzmann kernel".into(),
            ));
        }
        Ok(EntropyKernel::Power { m })
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            EntropyKernel::Boltzmann => None,
            EntropyKernel::Power { m } => Some(*m),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match self {
            EntropyKernel::Boltzmann => {
                if s <= 0.0 {
                    0.0
                } else {
                    s * s.ln()
                }
            }
            EntropyKernel::Power { m } => (s.powf(*m) - s) / (m - 1.0),
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        match self {
            EntropyKernel::Boltzmann => s.ln() + 1.0,
            EntropyKernel::Power { m } => (m * s.powf(m - 1.0) - 1.0) / (m - 1.0),
        }
    }

    /// P_f(s) = s·f'(s) − f(s), in closed form.
    pub fn pressure(&self, s: f64) -> f64 {
        match self {
            EntropyKernel::Boltzmann => s,
            EntropyKernel::Power { m } => s.powf(*m),
        }
    }

    /// Internal density F for the internal-plus-potential family:
    /// s·log s, or s^m/(m−1).
    pub fn big_f(&self, s: f64) -> f64 {
        match self {
            EntropyKernel::Boltzmann => {
                if s <= 0.0 {
                    0.0
                } else {
                    s * s.ln()
                }
            }
            EntropyKernel::Power { m } => s.powf(*m) / (m - 1.0),
        }
    }

    pub fn big_f_prime(&self, s: f64) -> f64 {
        match self {
            EntropyKernel::Boltzmann => s.ln() + 1.0,
            EntropyKernel::Power { m } => m / (m - 1.0) * s.powf(m - 1.0),
        }
    }
}

/// Energy evaluation result; infinities are data, not errors, so inequality
/// sweeps can skip such samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(*v),
            Energy::Infinite => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    RelativeInternal { kernel: EntropyKernel, reference: GridMeasure },
    InternalPlusPotential { kernel: EntropyKernel, v: Potential },
    PotentialOnly { v: Potential },
}

#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    family: Family,
    modulus: f64,
    min_value: f64,
    equilibrium: Option<GridMeasure>,
}

impl EnergyFunctional {
    /// J[ρ] = ∫ f(ρ/ρ*) dρ*; minimized (at 0) by ρ = ρ*.
    pub fn relative_internal(kernel: EntropyKernel, reference: GridMeasure) -> Self {
        EnergyFunctional {
            family: Family::RelativeInternal { kernel, reference: reference.clone() },
            modulus: 0.0,
            min_value: 0.0,
            equilibrium: Some(reference),
        }
    }

    /// J[ρ] = ∫ F(ρ) dx + ∫ V dρ on the given grid. The equilibrium is the
    /// Gibbs profile (Boltzmann) or the Barenblatt profile (power, m > 1),
    /// and the stored minimum is the discrete energy of that profile.
    pub fn internal_plus_potential(
        kernel: EntropyKernel,
        v: Potential,
        grid: Grid1D,
    ) -> Result<Self> {
        let profile = match kernel {
            EntropyKernel::Boltzmann => gibbs_profile(&v, grid)?,
            EntropyKernel::Power { m } => {
                if m <= 1.0 {
                    return Err(Error::Functional(format!(
                        "internal + potential with a power kernel needs m > 1, got {m}"
                    )));
                }
                barenblatt_profile(&v, m, grid)?
            }
        };
        let mut out = EnergyFunctional {
            modulus: v.modulus(),
            family: Family::InternalPlusPotential { kernel, v },
            min_value: 0.0,
            equilibrium: Some(profile.profile),
        };
        let eq = out.equilibrium.clone().unwrap();
        out.min_value = match out.energy(&Measure::Grid(eq))? {
            Energy::Finite(j) => j,
            Energy::Infinite => return Err(Error::Functional("equilibrium has infinite energy".into())),
        };
        Ok(out)
    }

    /// J[ρ] = ∫ V dρ; Ĵ = min V, attained by any ρ supported on Argmin V.
    pub fn potential_only(v: Potential) -> Self {
        EnergyFunctional {
            modulus: v.modulus(),
            min_value: v.min_value(),
            family: Family::PotentialOnly { v },
            equilibrium: None,
        }
    }

    pub fn with_modulus(mut self, modulus: f64) -> Self {
        self.modulus = modulus;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Ĵ.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn equilibrium(&self) -> Option<&GridMeasure> {
        self.equilibrium.as_ref()
    }

    pub fn energy(&self, rho: &Measure) -> Result<Energy> {
        match (&self.family, rho) {
            (Family::RelativeInternal { kernel, reference }, Measure::Grid(g)) => {
                let r = self.check_grid(g, reference.grid())?;
                let dx = r.grid().dx();
                // support of the reference is exact: wherever ρ* > 0 the
                // integrand is well defined, however extreme the ratio
                let mut outside = Vec::new();
                let mut terms = Vec::with_capacity(r.grid().n);
                for (ri, si) in r.density().iter().zip(reference.density()) {
                    if *si == 0.0 {
                        outside.push(ri * dx);
                    } else {
                        terms.push(kernel.f(ri / si) * si * dx);
                    }
                }
                if kahan_sum(outside) > OUTSIDE_MASS_TOL {
                    return Ok(Energy::Infinite);
                }
                Ok(Energy::Finite(kahan_sum(terms)))
            }
            (Family::InternalPlusPotential { kernel, v }, Measure::Grid(g)) => {
                let eq = self.equilibrium.as_ref().expect("set at construction");
                let r = self.check_grid(g, eq.grid())?;
                let dx = r.grid().dx();
                let terms = (0..r.grid().n).map(|i| {
                    let rho_i = r.density()[i];
                    (kernel.big_f(rho_i) + v.value(r.grid().center(i)) * rho_i) * dx
                });
                Ok(Energy::Finite(kahan_sum(terms)))
            }
            (Family::PotentialOnly { v }, Measure::Grid(g)) => {
                let dx = g.grid().dx();
                let terms =
                    (0..g.grid().n).map(|i| v.value(g.grid().center(i)) * g.density()[i] * dx);
                Ok(Energy::Finite(kahan_sum(terms)))
            }
            (Family::PotentialOnly { v }, Measure::Atomic(a)) => {
                let terms = a.positions().iter().zip(a.weights()).map(|(x, w)| v.value(*x) * w);
                Ok(Energy::Finite(kahan_sum(terms)))
            }
            _ => Err(Error::Functional(
                "this energy family needs a grid measure; convert atoms explicitly".into(),
            )),
        }
    }

    /// Metric slope |∂J|[ρ]: the L²_ρ norm of the driving field.
    pub fn slope(&self, rho: &Measure) -> Result<f64> {
        match (&self.family, rho) {
            (Family::RelativeInternal { kernel, reference }, Measure::Grid(g)) => {
                let r = self.check_grid(g, reference.grid())?;
                let dx = r.grid().dx();
                let eps_rho = floor_of(r.density());
                let eps_ref = floor_of(reference.density());
                let u: Vec<f64> = r
                    .density()
                    .iter()
                    .zip(reference.density())
                    .map(|(ri, si)| kernel.pressure(ri.max(eps_rho) / si.max(eps_ref)))
                    .collect();
                let grad = grad(&u, dx);
                let terms = (0..u.len()).map(|i| {
                    let (ri, si) = (r.density()[i], reference.density()[i]);
                    if ri < eps_rho || si < eps_ref {
                        0.0
                    } else {
                        let field = si / ri * grad[i];
                        field * field * ri * dx
                    }
                });
                Ok(kahan_sum(terms).max(0.0).sqrt())
            }
            (Family::InternalPlusPotential { kernel, v }, Measure::Grid(g)) => {
                let eq = self.equilibrium.as_ref().expect("set at construction");
                let r = self.check_grid(g, eq.grid())?;
                let dx = r.grid().dx();
                let eps = floor_of(r.density());
                let xi: Vec<f64> =
                    r.density().iter().map(|ri| kernel.big_f_prime(ri.max(eps))).collect();
                let grad = grad(&xi, dx);
                let terms = (0..xi.len()).map(|i| {
                    let ri = r.density()[i];
                    if ri < eps {
                        0.0
                    } else {
                        let field = grad[i] + v.derivative(r.grid().center(i));
                        field * field * ri * dx
                    }
                });
                Ok(kahan_sum(terms).max(0.0).sqrt())
            }
            (Family::PotentialOnly { v }, Measure::Grid(g)) => {
                let dx = g.grid().dx();
                let terms = (0..g.grid().n).map(|i| {
                    let d = v.derivative(g.grid().center(i));
                    d * d * g.density()[i] * dx
                });
                Ok(kahan_sum(terms).max(0.0).sqrt())
            }
            (Family::PotentialOnly { v }, Measure::Atomic(a)) => {
                let terms = a.positions().iter().zip(a.weights()).map(|(x, w)| {
                    let d = v.derivative(*x);
                    d * d * w
                });
                Ok(kahan_sum(terms).max(0.0).sqrt())
            }
            _ => Err(Error::Functional(
                "this energy family needs a grid measure; convert atoms explicitly".into(),
            )),
        }
    }

    fn check_grid<'a>(&self, g: &'a GridMeasure, expected: Grid1D) -> Result<&'a GridMeasure> {
        if g.grid() != expected {
            return Err(Error::Functional("measure lives on a different grid".into()));
        }
        Ok(g)
    }
}

fn floor_of(density: &[f64]) -> f64 {
    FLOOR_REL * density.iter().cloned().fold(0.0f64, f64::max)
}

/// Central differences inside, one-sided at the boundary.
fn grad(u: &[f64], dx: f64) -> Vec<f64> {
    let n = u.len();
    let mut g = vec![0.0; n];
    if n < 2 {
        return g;
    }
    g[0] = (u[1] - u[0]) / dx;
    g[n - 1] = (u[n - 1] - u[n - 2]) / dx;
    for i in 1..n - 1 {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalizer {
    Gibbs { z: f64 },
    Barenblatt { sigma: f64 },
}

#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    pub profile: GridMeasure,
    pub normalizer: Normalizer,
}

/// Density proportional to exp(−V) on the grid.
pub fn gibbs_profile(v: &Potential, grid: Grid1D) -> Result<EquilibriumProfile> {
    let vals: Vec<f64> = (0..grid.n).map(|i| (-v.value(grid.center(i))).exp()).collect();
    let z = kahan_sum(vals.iter().map(|w| w * grid.dx()));
    if z == 0.0 {
        return Err(Error::Functional("exp(-V) underflows to zero on the whole grid".into()));
    }
    if !z.is_finite() {
        return Err(Error::Functional("exp(-V) overflows on the grid".into()));
    }
    Ok(EquilibriumProfile {
        profile: GridMeasure::normalize(&vals, grid)?,
        normalizer: Normalizer::Gibbs { z },
    })
}

/// Barenblatt profile (σ − (m−1)/m·V)₊^{1/(m−1)} with σ chosen by bisection
/// on the mass equation ∫(σ − (m−1)/m·V)₊^{1/(m−1)} = 1.
///
/// The reported σ solves the mass equation under a fine quadrature (64
/// midpoint subsamples per cell), so it converges to the continuum
/// normalizer well below cell-level resolution.  The stored density uses a
/// slightly adjusted constant, re-bisected against the cell-center sum, so
/// that the discrete mass is exactly 1: that keeps m/(m−1)·ρ^{m−1} + V
/// constant across the support at machine precision, i.e. the profile is a
/// stationary state of the solver and not merely close to one.  The two
/// constants differ by O(Δx²).
pub fn barenblatt_profile(v: &Potential, m: f64, grid: Grid1D) -> Result<EquilibriumProfile> {
    if !(m.is_finite() && m > 1.0) {
        return Err(Error::Functional(format!("Barenblatt profile needs m > 1, got {m}")));
    }
    let c = (m - 1.0) / m;
    let density_at = |sigma: f64, x: f64| (sigma - c * v.value(x)).max(0.0).powf(1.0 / (m - 1.0));
    let vals_at = |sigma: f64| -> Vec<f64> {
        (0..grid.n).map(|i| density_at(sigma, grid.center(i))).collect()
    };
    const SUB: usize = 64;
    let fine_mass = |sigma: f64| -> f64 {
        let h = grid.dx() / SUB as f64;
        kahan_sum(
            (0..grid.n * SUB).map(|j| density_at(sigma, grid.x_min + (j as f64 + 0.5) * h) * h),
        ) - 1.0
    };
    let (lo, hi) = (1e-8, 1e8);
    if !(fine_mass(lo) <= 0.0 && fine_mass(hi) >= 0.0) {
        return Err(Error::Functional("no normalizing sigma in [1e-8, 1e8]".into()));
    }
    let sigma = bisect(fine_mass, lo, hi, 1e-12);
    let grid_mass = |s: f64| kahan_sum(vals_at(s).iter().map(|r| r * grid.dx())) - 1.0;
    let sigma_grid = bisect(grid_mass, lo, hi, 1e-12);
    Ok(EquilibriumProfile {
        profile: GridMeasure::normalize(&vals_at(sigma_grid), grid)?,
        normalizer: Normalizer::Barenblatt { sigma },
    })
}
