//! Gauss-Legendre rules (fixed composite, used for band averages) and an
//! adaptive Gauss-Kronrod integrator (used by the characteristic-function
//! inversion).

use std::f64::consts::PI;

/// Panels in the composite band rule.
pub const BAND_PANELS: usize = 128;
/// Gauss-Legendre order per panel; `BAND_PANELS * BAND_ORDER = 2048` nodes.
pub const BAND_ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule mapped onto a specific interval.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss-Legendre: `panels` equal sub-intervals of `[a, b]`,
    /// each carrying an `order`-point rule.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Rule {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Rule { nodes, weights }
    }

    /// The band rule over `[a, b]`; `refine` doubles the panel count.
    pub fn band(a: f64, b: f64, refine: bool) -> Rule {
        let panels = if refine { 2 * BAND_PANELS } else { BAND_PANELS };
        Rule::composite(a, b, panels, BAND_ORDER)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and `|K15 − G7|` error estimate on `[a, b]`.
pub fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss-Kronrod on `[a, b]`: bisect the interval with the
/// largest error estimate until the summed estimate is below `abs_tol`.
pub fn adaptive_gk(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    initial_pieces: usize,
    abs_tol: f64,
    max_intervals: usize,
) -> Adaptive {
    let pieces = initial_pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut intervals: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == pieces { b } else { lo + h };
            let (v, e) = gauss_kronrod_15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        if err <= abs_tol || intervals.len() >= max_intervals {
            return Adaptive {
                value,
                error: err,
                converged: err <= abs_tol,
            };
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty interval list");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point.
            return Adaptive {
                value,
                error: err,
                converged: false,
            };
        }
        let (v1, e1) = gauss_kronrod_15(&f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 16] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn three_point_rule_matches_tabulated() {
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn band_rule_has_2048_nodes_and_integrates_periodic() {
        let rule = Rule::band(0.0, 2.0 * PI, false);
        assert_eq!(rule.len(), 2048);
        let a: f64 = 0.6;
        let v = rule.integrate(|w| 1.0 / (1.0 - 2.0 * a * w.cos() + a * a));
        assert_relative_eq!(v, 2.0 * PI / (1.0 - a * a), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = adaptive_gk(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1, 1e-10, 10_000);
        assert!(r.converged);
        assert_relative_eq!(r.value, 2.0 * (1.0 / 1e-2f64).atan() / 1e-2, max_relative = 1e-10);
    }
}
