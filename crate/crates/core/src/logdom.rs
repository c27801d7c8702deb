//! Log-domain and summation primitives shared across the crate:
//! compensated sums, log-factorial tables, deterministic grids, the lower
//! convex hull, and tail-trend fits used by finite-truncation verdicts.

/// Kahan–Neumaier compensated accumulator. Summation order is part of the
/// contract: callers must feed values in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

/// `log k!` for `k = 0..=n`, by compensated cumulative summation of `ln i`.
/// Exact to a few ulps for the truncations used here.
pub fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    out.push(0.0);
    for i in 1..=n {
        acc.add((i as f64).ln());
        out.push(acc.value());
    }
    out
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

/// Logarithmically spaced grid on `[a, b]`, `a, b > 0`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0 && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    let step = (lb - la) / (n - 1) as f64;
    (0..n).map(|i| (la + step * i as f64).exp()).collect()
}

/// Lower convex hull of the points `(0, y_0), …, (n-1, y_{n-1})`, returned
/// as hull values at every integer abscissa (linear between hull vertices).
/// Entries equal to `-inf` are treated as absent support and excluded from
/// the vertex set.
pub fn lower_convex_hull(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 2);
    // Monotone chain over (k, y_k); keep right turns only.
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for (k, &v) in y.iter().enumerate() {
        if v == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 - x1) as f64 * (v - y1) - (k - x1) as f64 * (y2 - y1);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((k, v));
    }
    let mut out = vec![f64::NEG_INFINITY; n];
    for pair in hull.windows(2) {
        let (x1, y1) = pair[0];
        let (x2, y2) = pair[1];
        for k in x1..=x2 {
            let t = (k - x1) as f64 / (x2 - x1) as f64;
            out[k] = y1 + t * (y2 - y1);
        }
    }
    if hull.len() == 1 {
        out[hull[0].0] = hull[0].1;
    }
    out
}

/// Least-squares line `y ≈ intercept + slope · x`.
pub fn lsq_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = KahanSum::sum_iter(xs.iter().copied()) / n;
    let my = KahanSum::sum_iter(ys.iter().copied()) / n;
    let mut sxx = KahanSum::new();
    let mut sxy = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
    }
    let slope = if sxx.value() > 0.0 { sxy.value() / sxx.value() } else { 0.0 };
    (slope, my - slope * mx)
}

/// Pearson correlation of two samples; 0 when either is degenerate.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = KahanSum::sum_iter(xs.iter().copied()) / n;
    let my = KahanSum::sum_iter(ys.iter().copied()) / n;
    let (mut sxx, mut syy, mut sxy) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        syy.add((y - my) * (y - my));
        sxy.add((x - mx) * (y - my));
    }
    let denom = (sxx.value() * syy.value()).sqrt();
    if denom > 0.0 { sxy.value() / denom } else { 0.0 }
}

/// Slope of the least-squares line through the last `window` points of `y`
/// against their indices. Used as the finite-truncation tail-trend surrogate.
pub fn tail_slope(y: &[f64], window: usize) -> f64 {
    let n = y.len();
    let w = window.clamp(2, n);
    let ys = &y[n - w..];
    let xs: Vec<f64> = (0..w).map(|i| i as f64).collect();
    lsq_line(&xs, ys).0
}

/// Half-range growth `y_last - y_mid`: the finite-truncation discriminator
/// between bounded tails and slowly diverging ones (for which the pointwise
/// slope has already decayed below any fixed threshold).
pub fn tail_growth(y: &[f64]) -> f64 {
    y[y.len() - 1] - y[y.len() / 2]
}

/// Fit of `log y ≈ c + p·log x + q·log log x` over the given samples
/// (`x > 1` required). The second regressor separates power laws from
/// `t/log t`-type growth that a pure power fit cannot distinguish.
#[derive(Clone, Copy, Debug)]
pub struct PowerFit {
    pub p: f64,
    pub q: f64,
    pub intercept: f64,
}

pub fn tail_power_fit(xs: &[f64], ys: &[f64]) -> PowerFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3);
    let u: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let w: Vec<f64> = u.iter().map(|&u| u.max(1e-9).ln()).collect();
    let n = u.len() as f64;
    let mu = KahanSum::sum_iter(u.iter().copied()) / n;
    let mw = KahanSum::sum_iter(w.iter().copied()) / n;
    let my = KahanSum::sum_iter(ys.iter().copied()) / n;
    // Centered 2x2 normal equations.
    let (mut suu, mut suw, mut sww, mut suy, mut swy) = (
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
    );
    for i in 0..u.len() {
        let du = u[i] - mu;
        let dw = w[i] - mw;
        let dy = ys[i] - my;
        suu.add(du * du);
        suw.add(du * dw);
        sww.add(dw * dw);
        suy.add(du * dy);
        swy.add(dw * dy);
    }
    let det = suu.value() * sww.value() - suw.value() * suw.value();
    let (p, q) = if det.abs() > 1e-12 * suu.value().max(sww.value()).max(1.0) {
        (
            (suy.value() * sww.value() - swy.value() * suw.value()) / det,
            (swy.value() * suu.value() - suy.value() * suw.value()) / det,
        )
    } else {
        // Collinear regressors: fall back to the pure power fit.
        let p = if suu.value() > 0.0 { suy.value() / suu.value() } else { 0.0 };
        (p, 0.0)
    };
    PowerFit { p, q, intercept: my - p * mu - q * mw }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_ill_conditioned_sum() {
        // 1 + 1e16 - 1e16 = 1 exactly with compensation.
        let v = [1.0, 1e16, -1e16];
        assert_eq!(KahanSum::sum_iter(v.iter().copied()), 1.0);
    }

    #[test]
    fn log_factorials_match_direct_products() {
        let lf = log_factorials(20);
        let mut acc = 1.0f64;
        for k in 1..=20 {
            acc *= k as f64;
            assert!((lf[k] - acc.ln()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn hull_of_convex_data_is_identity() {
        let y: Vec<f64> = (0..32).map(|k| (k * k) as f64 * 0.1).collect();
        let hull = lower_convex_hull(&y);
        for (a, b) in y.iter().zip(&hull) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hull_removes_concave_bumps() {
        let y = vec![0.0, 5.0, 1.0, 6.0, 2.0];
        let hull = lower_convex_hull(&y);
        assert_eq!(hull[0], 0.0);
        assert_eq!(hull[4], 2.0);
        assert!(hull[1] <= 0.5 + 1e-12);
        for w in hull.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn power_fit_separates_power_from_log_correction() {
        let xs = logspace(1e4, 1e12, 64);
        // y = x / log x
        let ys: Vec<f64> = xs.iter().map(|&x| x.ln() - x.ln().ln()).collect();
        let fit = tail_power_fit(&xs, &ys);
        assert!((fit.p - 1.0).abs() < 0.02, "p = {}", fit.p);
        assert!((fit.q + 1.0).abs() < 0.1, "q = {}", fit.q);
        // y = x^0.96
        let ys2: Vec<f64> = xs.iter().map(|&x| 0.96 * x.ln()).collect();
        let fit2 = tail_power_fit(&xs, &ys2);
        assert!((fit2.p - 0.96).abs() < 0.02);
        assert!(fit2.q.abs() < 0.1);
    }
}
