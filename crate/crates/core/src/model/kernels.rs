//! Interval probabilities for sums of uniform and Gaussian arrival times,
//! and Gauss-Legendre quadrature for the readout-weighted integrals.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Antiderivative of the standard normal CDF.
fn cdf_integral(x: f64) -> f64 {
    x * normal_cdf(x) + normal_pdf(x)
}

/// P(lo <= Y < hi) for Y ~ N(mu, sigma).
pub fn prob_gauss_in(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if (lo..hi).contains(&mu) { 1.0 } else { 0.0 };
    }
    (normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma)).max(0.0)
}

/// P(lo <= U + Y < hi) for U ~ Uniform[a, b] and Y ~ N(mu, sigma).
pub fn prob_uniform_gauss_in(lo: f64, hi: f64, a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let w = b - a;
    if w <= 1e-9 {
        return prob_gauss_in(lo, hi, mu + a, sigma);
    }
    if sigma <= 0.0 {
        let l = (lo - mu).max(a);
        let h = (hi - mu).min(b);
        return ((h - l) / w).max(0.0);
    }
    let cdf = |x: f64| {
        sigma / w * (cdf_integral((x - a - mu) / sigma) - cdf_integral((x - b - mu) / sigma))
    };
    (cdf(hi) - cdf(lo)).clamp(0.0, 1.0)
}

/// P(lo <= U1 + U2 < hi) for independent uniforms on [a1,b1] and [a2,b2].
pub fn prob_uniform_uniform_in(lo: f64, hi: f64, a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let w1 = b1 - a1;
    let w2 = b2 - a2;
    if w1 <= 1e-9 && w2 <= 1e-9 {
        let s = a1 + a2;
        return if (lo..hi).contains(&s) { 1.0 } else { 0.0 };
    }
    if w1 <= 1e-9 {
        return interval_overlap(lo - a1, hi - a1, a2, b2) / w2;
    }
    if w2 <= 1e-9 {
        return interval_overlap(lo - a2, hi - a2, a1, b1) / w1;
    }
    let base = a1 + a2;
    let ramp = |y: f64| if y > 0.0 { y * y } else { 0.0 };
    let cdf = |x: f64| {
        let x = x - base;
        (ramp(x) - ramp(x - w1) - ramp(x - w2) + ramp(x - w1 - w2)) / (2.0 * w1 * w2)
    };
    (cdf(hi) - cdf(lo)).clamp(0.0, 1.0)
}

fn interval_overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Composite Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { nodes, weights }
    }

    /// Nodes and weights on [a, b] split into `panels` equal pieces.
    pub fn points(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for k in 0..panels {
            let lo = a + h * k as f64;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.points(a, b, panels).into_iter().map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}
