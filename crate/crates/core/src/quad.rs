//! Gauss–Legendre quadrature: fixed rules, composite panels and a
//! bisecting adaptive driver.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance {tol:e} (error estimate {estimate:e})")]
    NotConverged {
        a: f64,
        b: f64,
        tol: f64,
        estimate: f64,
    },
    #[error("invalid quadrature interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
}

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: `panels` equal panels of `rule` on each sub-interval
/// delimited by `breaks` (sorted, first = a, last = b).
pub fn composite_nodes(rule: &GaussLegendre, breaks: &[f64], panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(rule.len() * panels * breaks.len().saturating_sub(1));
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * step;
            let hi = if p + 1 == panels { b } else { lo + step };
            out.extend(rule.mapped(lo, hi));
        }
    }
    out
}

/// Adaptive Gauss–Legendre quadrature by interval bisection.
#[derive(Debug, Clone)]
pub struct Adaptive {
    rule: GaussLegendre,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self::new(1e-14, 1e-13)
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            rule: GaussLegendre::new(15),
            abs_tol,
            rel_tol,
            max_depth: 40,
        }
    }

    /// Integrates `f` over [a, b]; `breaks` are interior points where `f`
    /// is known to be non-smooth.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, breaks: &[f64]) -> Result<f64, QuadError> {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(QuadError::InvalidInterval(a, b));
        }
        if a == b {
            return Ok(0.0);
        }
        let mut pts = vec![a];
        pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        pts.push(b);
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup();
        let mut total = 0.0;
        for seg in pts.windows(2) {
            let whole = self.rule.integrate(seg[0], seg[1], &f);
            total += self.refine(&f, seg[0], seg[1], whole, 0)?;
        }
        Ok(total)
    }

    fn refine<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, whole: f64, depth: u32) -> Result<f64, QuadError> {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(a, mid, f);
        let right = self.rule.integrate(mid, b, f);
        let split = left + right;
        let err = (split - whole).abs();
        if err <= self.abs_tol.max(self.rel_tol * split.abs()) || mid <= a || mid >= b {
            return Ok(split);
        }
        if depth >= self.max_depth {
            return Err(QuadError::NotConverged {
                a,
                b,
                tol: self.abs_tol.max(self.rel_tol * split.abs()),
                estimate: err,
            });
        }
        Ok(self.refine(f, a, mid, left, depth + 1)? + self.refine(f, mid, b, right, depth + 1)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(6);
        // degree 11 is the limit for 6 nodes
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(11));
        let exact = (2f64.powi(12) - 1.0) / 12.0;
        assert!((v - exact).abs() < 1e-10 * exact);
        let wsum: f64 = rule.weights().iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let q = Adaptive::default();
        let v = q.integrate(|x: f64| x.abs(), -1.0, 2.0, &[0.0]).unwrap();
        assert!((v - 2.5).abs() < 1e-13);
        let g = q.integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, &[]).unwrap();
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_interval_is_zero() {
        assert_eq!(Adaptive::default().integrate(|x| x, 1.0, 1.0, &[]).unwrap(), 0.0);
        assert!(Adaptive::default().integrate(|x| x, 1.0, 0.0, &[]).is_err());
    }
}
