//! Monge-Kantorovich distances on the line.
//!
//! In one dimension the optimal quadratic-cost coupling is the monotone one,
//! so W₂² = ∫₀¹ |F_μ⁻¹(m) − F_ν⁻¹(m)|² dm. Atomic-atomic distances evaluate
//! that integral exactly by merging sorted cumulative weights; grid-grid
//! distances discretize it with quantile tables at a common resolution.

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, GridMeasure, Measure};
use crate::numeric::{format_sig17, kahan_sum};
use crate::potentials::{ArgminSet, Potential};

/// Atom-count cap for the brute-force oracle.
pub const ORACLE_LIMIT: usize = 200;

/// Transport plan between two atomic measures as (source, target, mass)
/// triples.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    pub entries: Vec<(usize, usize, f64)>,
}

impl CouplingPlan {
    /// Checks that the marginals match the given measures within `tol`.
    pub fn validate(&self, mu: &AtomicMeasure, nu: &AtomicMeasure, tol: f64) -> Result<()> {
        let mut row = vec![0.0; mu.len()];
        let mut col = vec![0.0; nu.len()];
        for &(i, j, m) in &self.entries {
            if i >= mu.len() || j >= nu.len() {
                return Err(Error::Measure(format!("plan entry ({i},{j}) out of range")));
            }
            if m < 0.0 {
                return Err(Error::Measure(format!("plan entry ({i},{j}) has negative mass")));
            }
            row[i] += m;
            col[j] += m;
        }
        for (i, (&r, &w)) in row.iter().zip(mu.weights()).enumerate() {
            if (r - w).abs() > tol {
                return Err(Error::Measure(format!("row sum {r} at {i} differs from weight {w}")));
            }
        }
        for (j, (&c, &w)) in col.iter().zip(nu.weights()).enumerate() {
            if (c - w).abs() > tol {
                return Err(Error::Measure(format!("column sum {c} at {j} differs from weight {w}")));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for &(i, j, m) in &self.entries {
            out.push_str(&format!("{i},{j},{}\n", format_sig17(m)));
        }
        out
    }
}

/// W₂ between two measures of the same representation.
pub fn w2(mu: &Measure, nu: &Measure) -> Result<f64> {
    match (mu, nu) {
        (Measure::Grid(a), Measure::Grid(b)) => Ok(w2_grid(a, b)),
        (Measure::Atomic(a), Measure::Atomic(b)) => Ok(w2_atomic(a, b)),
        _ => Err(Error::MixedMeasures),
    }
}

/// Grid-grid W₂ from quantile tables at resolution M = 4·max(n_μ, n_ν).
pub fn w2_grid(mu: &GridMeasure, nu: &GridMeasure) -> f64 {
    let m = 4 * mu.grid().n.max(nu.grid().n);
    let qa = mu.quantile_table(m).expect("M >= 8");
    let qb = nu.quantile_table(m).expect("M >= 8");
    let sum = kahan_sum(
        qa.positions
            .iter()
            .zip(&qb.positions)
            .map(|(a, b)| (a - b) * (a - b)),
    );
    (sum / m as f64).sqrt()
}

/// Exact atomic-atomic W₂ via the monotone coupling: walk the merged sorted
/// cumulative weights and charge each mass segment with the squared gap
/// between the source and target atoms it couples.
pub fn w2_atomic(mu: &AtomicMeasure, nu: &AtomicMeasure) -> f64 {
    let (xa, ca) = (mu.positions(), mu.cumulative());
    let (xb, cb) = (nu.positions(), nu.cumulative());
    let mut i = 0;
    let mut j = 0;
    let mut level = 0.0;
    let mut cost = 0.0;
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        let seg = next - level;
        if seg > 0.0 {
            let d = xa[i] - xb[j];
            cost += seg * d * d;
        }
        level = next;
        let adv_a = ca[i] <= next;
        let adv_b = cb[j] <= next;
        if adv_a {
            i += 1;
        }
        if adv_b {
            j += 1;
        }
    }
    cost.sqrt()
}

/// Grid-vs-atomic W₂ by sampling the atomic quantile function at the grid's
/// table resolution. Approximate: the step quantile of the atomic side is
/// integrated with the same midpoint levels as the grid side.
pub fn w2_grid_atomic(mu: &GridMeasure, nu: &AtomicMeasure) -> f64 {
    let m = 4 * mu.grid().n;
    let qa = mu.quantile_table(m).expect("M >= 8");
    let qb = nu.quantile_table(m).expect("M >= 8");
    let sum = kahan_sum(
        qa.positions
            .iter()
            .zip(&qb.positions)
            .map(|(a, b)| (a - b) * (a - b)),
    );
    (sum / m as f64).sqrt()
}

/// Brute-force optimal cost and plan by the north-west-corner rule on the
/// sorted atoms. Kept independent of [`w2_atomic`] so the two can cross-check
/// each other.
pub fn w2_oracle(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<(f64, CouplingPlan)> {
    for len in [mu.len(), nu.len()] {
        if len > ORACLE_LIMIT {
            return Err(Error::OracleSize { limit: ORACLE_LIMIT, got: len });
        }
    }
    let mut wa = mu.weights().to_vec();
    let mut wb = nu.weights().to_vec();
    let mut entries = Vec::new();
    let mut cost = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < wa.len() && j < wb.len() {
        let m = wa[i].min(wb[j]);
        if m > 0.0 {
            entries.push((i, j, m));
            let d = mu.positions()[i] - nu.positions()[j];
            cost += m * d * d;
        }
        wa[i] -= m;
        wb[j] -= m;
        if wa[i] <= 0.0 {
            i += 1;
        }
        if wb[j] <= 0.0 {
            j += 1;
        }
    }
    Ok((cost.sqrt(), CouplingPlan { entries }))
}

/// sqrt(∫ dist(x, Argmin V)² dρ): the Wasserstein distance from ρ to the set
/// of measures supported on the minimizers of V.
pub fn w2_to_potential_argmin(rho: &Measure, v: &Potential) -> Result<f64> {
    let set = v.argmin();
    let dist2 = |x: f64| -> Result<f64> {
        let d = match &set {
            ArgminSet::Points(ps) => {
                if ps.is_empty() {
                    return Err(Error::Potential("empty minimizer set".into()));
                }
                ps.iter().map(|p| (x - p).abs()).fold(f64::INFINITY, f64::min)
            }
            ArgminSet::Interval(a, b) => {
                if x < *a {
                    a - x
                } else if x > *b {
                    x - b
                } else {
                    0.0
                }
            }
        };
        Ok(d * d)
    };
    let total = match rho {
        Measure::Grid(g) => {
            let dx = g.grid().dx();
            let mut terms = Vec::with_capacity(g.grid().n);
            for i in 0..g.grid().n {
                terms.push(dist2(g.grid().center(i))? * g.density()[i] * dx);
            }
            kahan_sum(terms)
        }
        Measure::Atomic(a) => {
            let mut terms = Vec::with_capacity(a.len());
            for (x, w) in a.positions().iter().zip(a.weights()) {
                terms.push(dist2(*x)? * w);
            }
            kahan_sum(terms)
        }
    };
    Ok(total.sqrt())
}
