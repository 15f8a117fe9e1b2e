//! Probability measures on an interval.
//!
//! Two representations are supported: cell-centered densities on a uniform
//! grid (piecewise-constant density, hence piecewise-linear CDF) and finite
//! atomic measures (right-continuous step CDF). Both expose moments and the
//! quantile machinery that the transport module builds on.

use crate::error::{Error, Result};
use crate::numeric::{format_sig17, kahan_sum};

/// Position tolerance for merging duplicate atoms at construction.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Mass tolerance of a constructed measure.
pub const MASS_TOL: f64 = 1e-12;

/// Uniform grid of `n` cells on [x_min, x_max]; densities live at centers
/// x_i = x_min + (i + 1/2)·Δx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Grid("bounds must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::Grid(format!("x_max {x_max} must exceed x_min {x_min}")));
        }
        if n < 2 {
            return Err(Error::Grid(format!("need at least 2 cells, got {n}")));
        }
        Ok(Grid1D { x_min, x_max, n })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn left_edge(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }
}

/// Probability density sampled at the cell centers of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Grid1D,
    density: Vec<f64>,
}

impl GridMeasure {
    /// Scales nonnegative `values` so the midpoint quadrature mass is one.
    pub fn normalize(values: &[f64], grid: Grid1D) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Measure(format!(
                "expected {} values for the grid, got {}",
                grid.n,
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Measure(format!("non-finite value at cell {i}")));
            }
            if *v < 0.0 {
                return Err(Error::Measure(format!("negative value at cell {i}")));
            }
        }
        let dx = grid.dx();
        let mass = kahan_sum(values.iter().map(|v| v * dx));
        if mass <= 0.0 {
            return Err(Error::Measure("all values are zero".into()));
        }
        // Skip the rescale when the input is already normalized to well below
        // MASS_TOL; this makes normalization exactly idempotent.
        let density = if (mass - 1.0).abs() <= 1e-13 {
            values.to_vec()
        } else {
            values.iter().map(|v| v / mass).collect()
        };
        Ok(GridMeasure { grid, density })
    }

    /// Trusted constructor for states produced by mass-conserving updates.
    pub(crate) fn from_conserved(grid: Grid1D, density: Vec<f64>) -> Self {
        debug_assert_eq!(density.len(), grid.n);
        GridMeasure { grid, density }
    }

    /// Discretized Gaussian; see [`gaussian_truncated`] for the window check.
    pub fn gaussian(grid: Grid1D, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::Measure(format!("gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        let values: Vec<f64> = (0..grid.n)
            .map(|i| {
                let z = (grid.center(i) - mu) / sigma;
                (-0.5 * z * z).exp()
            })
            .collect();
        Self::normalize(&values, grid)
    }

    /// Indicator of [a, b] normalized on the grid.
    pub fn uniform(grid: Grid1D, a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Measure(format!("uniform needs b > a, got ({a}, {b})")));
        }
        let values: Vec<f64> = (0..grid.n)
            .map(|i| {
                let x = grid.center(i);
                if x >= a && x <= b {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::normalize(&values, grid)
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        let dx = self.grid.dx();
        kahan_sum(self.density.iter().map(|d| d * dx))
    }

    pub fn moment(&self, k: u32) -> f64 {
        let dx = self.grid.dx();
        kahan_sum(
            (0..self.grid.n).map(|i| self.grid.center(i).powi(k as i32) * self.density[i] * dx),
        )
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) - m1 * m1
    }

    /// Mass up to the right edge of each cell; last entry is the total mass.
    fn cumulative(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut out = Vec::with_capacity(self.grid.n);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for d in &self.density {
            let v = d * dx;
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            out.push(sum + comp);
        }
        out
    }

    /// Piecewise-linear CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let cum = self.cumulative();
        self.cdf_with(&cum, x)
    }

    fn cdf_with(&self, cum: &[f64], x: f64) -> f64 {
        if x <= self.grid.x_min {
            return 0.0;
        }
        if x >= self.grid.x_max {
            return cum[self.grid.n - 1];
        }
        let dx = self.grid.dx();
        let i = (((x - self.grid.x_min) / dx) as usize).min(self.grid.n - 1);
        let prev = if i == 0 { 0.0 } else { cum[i - 1] };
        prev + self.density[i] * (x - self.grid.left_edge(i))
    }

    /// Left-most position whose CDF reaches `m`.
    pub fn quantile(&self, m: f64) -> f64 {
        let cum = self.cumulative();
        self.quantile_with(&cum, m)
    }

    fn quantile_with(&self, cum: &[f64], m: f64) -> f64 {
        let total = cum[self.grid.n - 1];
        if m >= total {
            // highest point where any mass remains
            let i = (0..self.grid.n).rev().find(|&i| self.density[i] > 0.0).unwrap_or(0);
            return self.grid.left_edge(i) + (total - if i == 0 { 0.0 } else { cum[i - 1] }) / self.density[i].max(f64::MIN_POSITIVE);
        }
        let i = cum.partition_point(|&c| c < m).min(self.grid.n - 1);
        let prev = if i == 0 { 0.0 } else { cum[i - 1] };
        let rho = self.density[i];
        if rho <= 0.0 {
            return self.grid.left_edge(i);
        }
        (self.grid.left_edge(i) + (m - prev) / rho).min(self.grid.left_edge(i) + self.grid.dx())
    }

    pub fn quantile_table(&self, m: usize) -> Result<QuantileTable> {
        if m < 2 {
            return Err(Error::Measure(format!("quantile table needs M >= 2, got {m}")));
        }
        let cum = self.cumulative();
        let positions = (0..m)
            .map(|k| self.quantile_with(&cum, (k as f64 + 0.5) / m as f64))
            .collect();
        Ok(QuantileTable { positions })
    }

    /// ∫ |self − other| dx; both measures must share the grid.
    pub fn l1_distance(&self, other: &GridMeasure) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Measure("l1 distance needs a common grid".into()));
        }
        let dx = self.grid.dx();
        Ok(kahan_sum(
            self.density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| (a - b).abs() * dx),
        ))
    }

    pub fn linf_distance(&self, other: &GridMeasure) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Measure("sup distance needs a common grid".into()));
        }
        Ok(self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        for i in 0..self.grid.n {
            out.push_str(&format_sig17(self.grid.center(i)));
            out.push(',');
            out.push_str(&format_sig17(self.density[i]));
            out.push('\n');
        }
        out
    }
}

/// True when [μ − 5σ, μ + 5σ] is not contained in the grid window, i.e. the
/// discretized Gaussian is visibly truncated. The CLI surfaces this as a
/// warning; construction itself still succeeds.
pub fn gaussian_truncated(grid: Grid1D, mu: f64, sigma: f64) -> bool {
    mu - 5.0 * sigma < grid.x_min || mu + 5.0 * sigma > grid.x_max
}

/// Finite convex combination of Dirac masses, sorted by position.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Measure("atomic measure needs at least one atom".into()));
        }
        for (x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::Measure(format!("non-finite atom ({x}, {w})")));
            }
            if *w <= 0.0 {
                return Err(Error::Measure(format!("atom at {x} has nonpositive weight {w}")));
            }
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge duplicates against the anchor position of the current group
        let mut positions: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut weights: Vec<f64> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match positions.last() {
                Some(&last) if (x - last).abs() <= ATOM_MERGE_TOL => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    positions.push(x);
                    weights.push(w);
                }
            }
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-13 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(AtomicMeasure { positions, weights })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    pub fn moment(&self, k: u32) -> f64 {
        kahan_sum(
            self.positions
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x.powi(k as i32) * w),
        )
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Running mass totals; last entry is the total mass.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weights.len());
        let mut sum = 0.0;
        for w in &self.weights {
            sum += w;
            out.push(sum);
        }
        out
    }

    /// Right-continuous step CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let cum = self.cumulative();
        match self.positions.partition_point(|&p| p <= x) {
            0 => 0.0,
            k => cum[k - 1],
        }
    }

    /// Left-most atom whose cumulative weight reaches `m`.
    pub fn quantile(&self, m: f64) -> f64 {
        let cum = self.cumulative();
        let k = cum.partition_point(|&c| c < m).min(self.positions.len() - 1);
        self.positions[k]
    }

    pub fn quantile_table(&self, m: usize) -> Result<QuantileTable> {
        if m < 2 {
            return Err(Error::Measure(format!("quantile table needs M >= 2, got {m}")));
        }
        let cum = self.cumulative();
        let positions = (0..m)
            .map(|k| {
                let level = (k as f64 + 0.5) / m as f64;
                let j = cum.partition_point(|&c| c < level).min(self.positions.len() - 1);
                self.positions[j]
            })
            .collect();
        Ok(QuantileTable { positions })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,weight\n");
        for (x, w) in self.positions.iter().zip(&self.weights) {
            out.push_str(&format_sig17(*x));
            out.push(',');
            out.push_str(&format_sig17(*w));
            out.push('\n');
        }
        out
    }
}

/// Inverse-CDF sampled at the uniform mass levels m_k = (k + 1/2)/M.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    pub positions: Vec<f64>,
}

impl QuantileTable {
    pub fn resolution(&self) -> usize {
        self.positions.len()
    }

    pub fn level(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.positions.len() as f64
    }
}

/// Either measure representation; flows and the CLI dispatch on this.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Grid(GridMeasure),
    Atomic(AtomicMeasure),
}

impl Measure {
    pub fn mass(&self) -> f64 {
        match self {
            Measure::Grid(g) => g.mass(),
            Measure::Atomic(a) => a.mass(),
        }
    }

    pub fn moment(&self, k: u32) -> f64 {
        match self {
            Measure::Grid(g) => g.moment(k),
            Measure::Atomic(a) => a.moment(k),
        }
    }

    pub fn quantile_table(&self, m: usize) -> Result<QuantileTable> {
        match self {
            Measure::Grid(g) => g.quantile_table(m),
            Measure::Atomic(a) => a.quantile_table(m),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Measure::Grid(g) => g.to_csv(),
            Measure::Atomic(a) => a.to_csv(),
        }
    }
}

/// Quantile table for either representation (op-level entry point).
pub fn quantile_table(mu: &Measure, m: usize) -> Result<QuantileTable> {
    mu.quantile_table(m)
}
