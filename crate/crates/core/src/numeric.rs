//! Small numerical helpers shared across modules.

/// Neumaier-compensated sum. Masses and integrals go through this so that
/// quadrature checks stay near machine precision independent of length.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Decimal formatting with 17 significant digits: enough to round-trip an
/// f64, and byte-stable across runs, which the CSV writers rely on.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let prec = (16 - exp).max(0) as usize;
    format!("{:.*}", prec, x)
}

/// Bisection for a root of `f` on [lo, hi]; assumes f(lo) and f(hi) have
/// opposite signs. Returns the midpoint once the bracket is below `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinary least squares y = a + b x. Returns (a, b, max |residual|).
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = kahan_sum(xs.iter().copied()) / n;
    let my = kahan_sum(ys.iter().copied()) / n;
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = kahan_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let b = sxy / sxx;
    let a = my - b * mx;
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (a + b * x)).abs())
        .fold(0.0f64, f64::max);
    (a, b, resid)
}
