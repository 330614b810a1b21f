use super::{dot, norm, EigsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real symmetric tridiagonal matrix, optionally with periodic corner
/// entries `A[0][n-1] = A[n-1][0] = corner`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSym {
    diag: Vec<f64>,
    off: Vec<f64>,
    corner: Option<f64>,
}

impl TridiagonalSym {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, EigsError> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(EigsError::InvalidRequest(format!(
                "diagonal of length {} needs {} off-diagonal entries, got {}",
                diag.len(),
                diag.len().saturating_sub(1),
                off.len()
            )));
        }
        if diag.iter().chain(&off).any(|x| !x.is_finite()) {
            return Err(EigsError::InvalidRequest("non-finite matrix entry".into()));
        }
        Ok(Self { diag, off, corner: None })
    }

    pub fn periodic(diag: Vec<f64>, off: Vec<f64>, corner: f64) -> Result<Self, EigsError> {
        let mut t = Self::new(diag, off)?;
        if t.len() < 3 || !corner.is_finite() {
            return Err(EigsError::InvalidRequest("periodic tridiagonal needs n >= 3 and a finite corner".into()));
        }
        t.corner = Some(corner);
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn corner(&self) -> Option<f64> {
        self.corner
    }

    pub fn is_periodic(&self) -> bool {
        self.corner.is_some()
    }

    /// T + σI
    pub fn shifted(&self, sigma: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| d + sigma).collect(),
            off: self.off.clone(),
            corner: self.corner,
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        if let Some(c) = self.corner {
            y[0] += c * x[n - 1];
            y[n - 1] += c * x[0];
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            if let Some(c) = self.corner {
                if i == 0 || i == n - 1 {
                    r += c.abs();
                }
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (non-periodic only).
    pub fn sturm_count(&self, x: f64) -> usize {
        let scale = self.diag.iter().chain(&self.off).fold(0.0f64, |m, v| m.max(v.abs())).max(x.abs());
        let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * scale.max(1.0));
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }
}

/// The `m` smallest eigenvalues, each bisected to an interval of width
/// at most `tol`, sorted ascending.
pub fn sturm_smallest(t: &TridiagonalSym, m: usize, tol: f64) -> Result<Vec<f64>, EigsError> {
    if t.is_periodic() {
        return Err(EigsError::Periodic);
    }
    if !(tol > 0.0) || m > t.len() {
        return Err(EigsError::InvalidRequest(format!(
            "need tol > 0 and m <= n (tol = {tol}, m = {m}, n = {})",
            t.len()
        )));
    }
    let (glo, ghi) = t.gershgorin();
    let pad = f64::EPSILON * (glo.abs().max(ghi.abs()) + 1.0) * 4.0;
    let (glo, ghi) = (glo - pad, ghi + pad);
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        // invariant: count(lo) <= j < count(hi)
        let mut lo = out.last().copied().map_or(glo, |prev: f64| prev - tol).max(glo);
        if t.sturm_count(lo) > j {
            lo = glo;
        }
        let mut hi = ghi;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if t.sturm_count(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct InverseIteration {
    pub vector: Vec<f64>,
    /// Rayleigh quotient of `vector`.
    pub rayleigh: f64,
    /// ‖Tv − θ′v‖ with θ′ the Rayleigh quotient.
    pub residual: f64,
    pub iterations: usize,
}

/// Eigenvector for the eigenvalue nearest `theta`; the shift is perturbed
/// by ±10·tol (at most 5 times) when the shifted system is exactly singular.
pub fn inverse_iteration(t: &TridiagonalSym, theta: f64, tol: f64) -> Result<InverseIteration, EigsError> {
    if t.is_periodic() {
        return Err(EigsError::Periodic);
    }
    if !(tol > 0.0) {
        return Err(EigsError::InvalidRequest("tol must be > 0".into()));
    }
    const MAX_RETRIES: usize = 5;
    const MAX_ITERS: usize = 12;
    let n = t.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d7e_2a11);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut shift = theta;
    let mut last_residual = f64::INFINITY;
    let mut total_iters = 0;
    for attempt in 0..=MAX_RETRIES {
        let mut v = start.clone();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut singular = false;
        for _ in 0..MAX_ITERS {
            total_iters += 1;
            match solve_shifted(t, shift, &v) {
                Some(mut x) => {
                    let nx = norm(&x);
                    if !(nx.is_finite() && nx > 0.0) {
                        singular = true;
                        break;
                    }
                    x.iter_mut().for_each(|xi| *xi /= nx);
                    v = x;
                }
                None => {
                    singular = true;
                    break;
                }
            }
            let (rq, res) = rayleigh_residual(t, &v);
            last_residual = res;
            if res <= tol {
                return Ok(InverseIteration {
                    vector: v,
                    rayleigh: rq,
                    residual: res,
                    iterations: total_iters,
                });
            }
        }
        if !singular {
            break;
        }
        if attempt == MAX_RETRIES {
            return Err(EigsError::Singular { retries: MAX_RETRIES });
        }
        let step = 10.0 * tol * (attempt / 2 + 1) as f64;
        shift = if attempt % 2 == 0 { theta + step } else { theta - step };
    }
    Err(EigsError::InverseIterationFailed {
        iterations: total_iters,
        residual: last_residual,
        tol,
    })
}

fn rayleigh_residual(t: &TridiagonalSym, v: &[f64]) -> (f64, f64) {
    let mut tv = vec![0.0; v.len()];
    t.apply(v, &mut tv);
    let rq = dot(v, &tv) / dot(v, v);
    let r: f64 = tv.iter().zip(v).map(|(a, b)| (a - rq * b).powi(2)).sum();
    (rq, r.sqrt())
}

/// Solves (T − σI)x = b by Gaussian elimination with partial pivoting.
/// Returns `None` on an exactly zero pivot.
fn solve_shifted(t: &TridiagonalSym, sigma: f64, b: &[f64]) -> Option<Vec<f64>> {
    let n = t.len();
    let mut d: Vec<f64> = t.diag.iter().map(|x| x - sigma).collect();
    if n == 1 {
        return (d[0] != 0.0).then(|| vec![b[0] / d[0]]);
    }
    let mut dl = t.off.clone();
    let mut du = t.off.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            x[i + 1] -= f * x[i];
            if i + 2 < n {
                du2[i] = 0.0;
            }
        } else {
            // swap rows i and i+1
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            x.swap(i, i + 1);
            x[i + 1] -= f * x[i];
        }
        dl[i] = 0.0;
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    x[n - 1] /= d[n - 1];
    x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Some(x)
}
