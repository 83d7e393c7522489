//! Gauss-Legendre rules.

use crate::scalar::Real;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::lit(-x);
            nodes[n - 1 - i] = T::lit(x);
            weights[i] = T::lit(w);
            weights[n - 1 - i] = T::lit(w);
        }
        Self { nodes, weights }
    }

    /// The same rule mapped onto `[a, b]`.
    pub fn on_interval(n: usize, a: T, b: T) -> Self {
        let base = Self::new(n);
        let half = (b - a) * T::lit(0.5);
        let mid = (b + a) * T::lit(0.5);
        Self {
            nodes: base.nodes.iter().map(|x| mid + half * *x).collect(),
            weights: base.weights.iter().map(|w| *w * half).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (x, w)| acc + *w * f(*x))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}
