//! Cubic Hermite pieces shared by the tabulated generators and radial laws.

/// Cubic Hermite interpolant on `[x0, x1]` with end slopes `d0`, `d1`.
#[inline]
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    if h == 0.0 {
        return y0;
    }
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Fritsch–Carlson slope limiting so the Hermite pieces stay monotone.
pub(crate) fn limit_slopes(xs: &[f64], ys: &[f64], ds: &mut [f64]) {
    for k in 0..xs.len().saturating_sub(1) {
        let h = xs[k + 1] - xs[k];
        if h <= 0.0 {
            continue;
        }
        let delta = (ys[k + 1] - ys[k]) / h;
        if delta == 0.0 {
            ds[k] = 0.0;
            ds[k + 1] = 0.0;
            continue;
        }
        // Slopes must share the sign of the secant.
        if ds[k] / delta < 0.0 {
            ds[k] = 0.0;
        }
        if ds[k + 1] / delta < 0.0 {
            ds[k + 1] = 0.0;
        }
        let alpha = ds[k] / delta;
        let beta = ds[k + 1] / delta;
        let r = alpha * alpha + beta * beta;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            ds[k] = tau * alpha * delta;
            ds[k + 1] = tau * beta * delta;
        }
    }
}

/// Index `k` with `xs[k] <= x < xs[k + 1]`, clamped to the table.
#[inline]
pub(crate) fn bracket(xs: &[f64], x: f64) -> usize {
    let k = xs.partition_point(|v| *v <= x);
    k.saturating_sub(1).min(xs.len() - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let v = hermite(0.5, 2.0, f(0.5), f(2.0), df(0.5), df(2.0), 1.3);
        assert!((v - f(1.3)).abs() < 1e-13);
    }

    #[test]
    fn limited_slopes_are_monotone() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 0.0, 1.0, 1.0];
        let mut ds = [5.0, 5.0, 5.0, 5.0];
        limit_slopes(&xs, &ys, &mut ds);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..300 {
            let x = i as f64 * 0.01;
            let k = bracket(&xs, x);
            let v = hermite(xs[k], xs[k + 1], ys[k], ys[k + 1], ds[k], ds[k + 1], x);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
