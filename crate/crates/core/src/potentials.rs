//! Confinement potentials: value, derivative selection, convexity modulus,
//! minimizer set, and the optional "convex + bounded" decomposition used by
//! the Holley-Stroock rate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::bisect;

pub const DEFAULT_WINDOW: (f64, f64) = (-8.0, 8.0);

/// Samples used by [`osc_of`] and the numeric argmin bracketing.
const SCAN_SAMPLES: usize = 10_000;

/// Tolerance for "x is a declared minimizer" in the derivative selection.
const ARGMIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ArgminSet {
    Points(Vec<f64>),
    Interval(f64, f64),
}

impl ArgminSet {
    fn contains(&self, x: f64) -> bool {
        match self {
            ArgminSet::Points(ps) => ps.iter().any(|p| (x - p).abs() <= ARGMIN_TOL),
            ArgminSet::Interval(a, b) => *a <= x && x <= *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// V(x) = K x²/2
    Quadratic { k: f64 },
    /// V(x) = a x⁴ − b x²
    DoubleWell { a: f64, b: f64 },
    /// V(x) = |x|
    Abs,
    /// V(x) = K x²/2 + ε cos x
    QuadPlusCos { k: f64, eps: f64 },
    /// V(x) = c
    Constant { c: f64 },
}

/// Bounded part V₂ of a decomposition V = V₁ + V₂ with V₁ = K x²/2.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedPart {
    Zero,
    Cos { eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub k: f64,
    pub bounded: BoundedPart,
}

impl Decomposition {
    pub fn v1(&self, x: f64) -> f64 {
        0.5 * self.k * x * x
    }

    pub fn v2(&self, x: f64) -> f64 {
        match self.bounded {
            BoundedPart::Zero => 0.0,
            BoundedPart::Cos { eps } => eps * x.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    window: (f64, f64),
    argmin: ArgminSet,
    min_value: f64,
}

impl Potential {
    pub fn quadratic(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Potential(format!("quadratic needs K > 0, got {k}")));
        }
        Self::finalize(PotentialKind::Quadratic { k }, DEFAULT_WINDOW)
    }

    pub fn double_well(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Potential(format!("double well needs a > 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::Potential("double well needs finite b".into()));
        }
        Self::finalize(PotentialKind::DoubleWell { a, b }, DEFAULT_WINDOW)
    }

    pub fn abs() -> Result<Self> {
        Self::finalize(PotentialKind::Abs, DEFAULT_WINDOW)
    }

    pub fn quad_plus_cos(k: f64, eps: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Potential(format!("quad_plus_cos needs K > 0, got {k}")));
        }
        if !eps.is_finite() {
            return Err(Error::Potential("quad_plus_cos needs finite eps".into()));
        }
        Self::finalize(PotentialKind::QuadPlusCos { k, eps }, DEFAULT_WINDOW)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Potential("constant potential needs a finite value".into()));
        }
        Self::finalize(PotentialKind::Constant { c }, DEFAULT_WINDOW)
    }

    /// Builds a builtin by name with parameters from a config map. Every
    /// expected key must be present and no extras are allowed.
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let expected: &[&str] = match name {
            "quadratic" => &["k"],
            "double_well" => &["a", "b"],
            "abs" => &[],
            "quad_plus_cos" => &["k", "eps"],
            "constant" => &["c"],
            other => {
                return Err(Error::Potential(format!("unknown potential '{other}'")));
            }
        };
        for key in expected {
            if !params.contains_key(*key) {
                return Err(Error::Potential(format!("potential '{name}' needs parameter '{key}'")));
            }
        }
        for key in params.keys() {
            if !expected.contains(&key.as_str()) {
                return Err(Error::Potential(format!(
                    "potential '{name}' does not take parameter '{key}'"
                )));
            }
        }
        match name {
            "quadratic" => Self::quadratic(params["k"]),
            "double_well" => Self::double_well(params["a"], params["b"]),
            "abs" => Self::abs(),
            "quad_plus_cos" => Self::quad_plus_cos(params["k"], params["eps"]),
            "constant" => Self::constant(params["c"]),
            _ => unreachable!(),
        }
    }

    /// Re-anchors the measurement window (osc, numeric argmin search).
    pub fn with_window(self, x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Potential(format!("bad window [{x_min}, {x_max}]")));
        }
        Self::finalize(self.kind, (x_min, x_max))
    }

    fn finalize(kind: PotentialKind, window: (f64, f64)) -> Result<Self> {
        let (argmin, min_value) = match &kind {
            PotentialKind::Quadratic { .. } => (ArgminSet::Points(vec![0.0]), 0.0),
            PotentialKind::DoubleWell { a, b } => {
                if *b > 0.0 {
                    let r = (b / (2.0 * a)).sqrt();
                    (ArgminSet::Points(vec![-r, r]), -b * b / (4.0 * a))
                } else {
                    (ArgminSet::Points(vec![0.0]), 0.0)
                }
            }
            PotentialKind::Abs => (ArgminSet::Points(vec![0.0]), 0.0),
            PotentialKind::QuadPlusCos { k, eps } => {
                let ps = bracket_minima(|x| kind_value(&kind, x), |x| k * x - eps * x.sin(), window);
                if ps.is_empty() {
                    return Err(Error::Potential("no minimizer found on the window".into()));
                }
                let vmin = ps.iter().map(|p| kind_value(&kind, *p)).fold(f64::INFINITY, f64::min);
                (ArgminSet::Points(ps), vmin)
            }
            PotentialKind::Constant { c } => (ArgminSet::Interval(window.0, window.1), *c),
        };
        Ok(Potential { kind, window, argmin, min_value })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn value(&self, x: f64) -> f64 {
        kind_value(&self.kind, x)
    }

    /// Subdifferential selection: 0 at every declared minimizer, the
    /// minimal-norm subgradient at kinks, the classical derivative elsewhere.
    pub fn derivative(&self, x: f64) -> f64 {
        if self.argmin.contains(x) {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Quadratic { k } => k * x,
            PotentialKind::DoubleWell { a, b } => 4.0 * a * x.powi(3) - 2.0 * b * x,
            PotentialKind::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            PotentialKind::QuadPlusCos { k, eps } => k * x - eps * x.sin(),
            PotentialKind::Constant { .. } => 0.0,
        }
    }

    /// λ-convexity parameter: a lower bound on the curvature.
    pub fn modulus(&self) -> f64 {
        match &self.kind {
            PotentialKind::Quadratic { k } => *k,
            // V'' = 12ax² − 2b ≥ −2b; conservative but valid for every x
            PotentialKind::DoubleWell { b, .. } => -2.0 * b,
            PotentialKind::Abs => 0.0,
            PotentialKind::QuadPlusCos { k, eps } => k - eps.abs(),
            PotentialKind::Constant { .. } => 0.0,
        }
    }

    /// K := λ when the modulus is strictly positive.
    pub fn k(&self) -> Option<f64> {
        let l = self.modulus();
        (l > 0.0).then_some(l)
    }

    pub fn argmin(&self) -> ArgminSet {
        self.argmin.clone()
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn decomposition(&self) -> Option<Decomposition> {
        match &self.kind {
            PotentialKind::Quadratic { k } => {
                Some(Decomposition { k: *k, bounded: BoundedPart::Zero })
            }
            PotentialKind::QuadPlusCos { k, eps } => {
                Some(Decomposition { k: *k, bounded: BoundedPart::Cos { eps: *eps } })
            }
            _ => None,
        }
    }

    /// sup V₂ − inf V₂ over the window; needs a decomposition.
    pub fn osc(&self) -> Result<f64> {
        let d = self
            .decomposition()
            .ok_or_else(|| Error::Potential("osc needs a convex + bounded decomposition".into()))?;
        Ok(osc_of(|x| d.v2(x), self.window))
    }
}

fn kind_value(kind: &PotentialKind, x: f64) -> f64 {
    match kind {
        PotentialKind::Quadratic { k } => 0.5 * k * x * x,
        PotentialKind::DoubleWell { a, b } => a * x.powi(4) - b * x.powi(2),
        PotentialKind::Abs => x.abs(),
        PotentialKind::QuadPlusCos { k, eps } => 0.5 * k * x * x + eps * x.cos(),
        PotentialKind::Constant { c } => *c,
    }
}

/// Oscillation sup f − inf f over uniform window samples.
pub fn osc_of(f: impl Fn(f64) -> f64, window: (f64, f64)) -> f64 {
    let (a, b) = window;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..=SCAN_SAMPLES {
        let v = f(a + (b - a) * j as f64 / SCAN_SAMPLES as f64);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// c_g² = 2K·exp(−osc(V₂)).
pub fn holley_stroock_rate(k: f64, osc: f64) -> f64 {
    assert!(k > 0.0 && osc >= 0.0, "holley_stroock_rate needs K > 0 and osc >= 0");
    2.0 * k * (-osc).exp()
}

/// Global minimizers of a smooth coercive function: scan the window for local
/// minima near the global level, then refine each bracket by bisecting f'.
fn bracket_minima(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    window: (f64, f64),
) -> Vec<f64> {
    let (a, b) = window;
    let n = SCAN_SAMPLES;
    let xs: Vec<f64> = (0..=n).map(|j| a + (b - a) * j as f64 / n as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let vmin = vs.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = vmin + 1e-9 * (1.0 + vmin.abs());
    let mut out: Vec<f64> = Vec::new();
    for i in 1..n {
        if vs[i] <= vs[i - 1] && vs[i] <= vs[i + 1] && vs[i] <= cutoff {
            let x = if fp(xs[i - 1]).signum() != fp(xs[i + 1]).signum() {
                bisect(&fp, xs[i - 1], xs[i + 1], 1e-13)
            } else {
                xs[i]
            };
            if out.last().map_or(true, |p| (x - p).abs() > 1e-8) {
                out.push(x);
            }
        }
    }
    out
}
