use super::{dot, norm, EigsError};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A symmetric linear map `y = A x` on ℝⁿ.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

impl LinearOperator for super::TridiagonalSym {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        super::TridiagonalSym::apply(self, x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Cap on operator applications.
    pub max_iter: usize,
    /// Absolute tolerance on ‖Ax − θx‖ for each requested pair.
    pub tol: f64,
    pub seed: u64,
    /// Largest Krylov basis kept in memory before a thick restart.
    pub basis_size: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-9,
            seed: 0x5eed_1a2c,
            basis_size: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Explicit ‖Ax − θx‖ recomputed after the iteration stops.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    /// max |⟨q_i, q_j⟩ − δ_ij| over the final basis.
    pub orthogonality_loss: f64,
}

impl LanczosResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

const CHECK_EVERY: usize = 10;

/// The `k` smallest eigenpairs of a symmetric operator by thick-restart
/// Lanczos with full reorthogonalization.
///
/// Exhausting `max_iter` is not an error: the best Ritz pairs are returned
/// with `converged == false`.
pub fn lanczos_smallest<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    opts: &LanczosOptions,
) -> Result<LanczosResult, EigsError> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(EigsError::InvalidRequest(format!("need 1 <= k <= n (k = {k}, n = {n})")));
    }
    if !(opts.tol > 0.0) {
        return Err(EigsError::InvalidRequest("tol must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    check_symmetry(op, &mut rng)?;

    let m = opts.basis_size.max(k + 8).min(n);
    let keep = (k + 8).max(m / 2).min(m.saturating_sub(2)).max(k.min(m));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut proj = DMatrix::<f64>::zeros(m, m);
    let mut q0 = random_vector(&mut rng, n);
    let n0 = norm(&q0);
    q0.iter_mut().for_each(|x| *x /= n0);
    basis.push(q0);

    let mut w = vec![0.0; n];
    let mut tail_norm = 0.0;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut next_check = CHECK_EVERY.min(m);
    // columns already expanded (A q_j computed) for j < expanded
    let mut expanded = 0;
    let mut ritz: (Vec<f64>, DMatrix<f64>);
    let mut converged = false;

    loop {
        // expand until either the basis is full or a check is due
        while expanded < basis.len() && expanded < m {
            let j = expanded;
            op.apply(&basis[j], &mut w);
            iterations += 1;
            let scale = norm(&w);
            let coeffs = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                proj[(i, j)] = *c;
                proj[(j, i)] = *c;
            }
            tail_norm = norm(&w);
            expanded += 1;
            if basis.len() < m && expanded == basis.len() {
                if tail_norm > 1e-10 * scale.max(f64::MIN_POSITIVE) && basis.len() < n {
                    basis.push(w.iter().map(|x| x / tail_norm).collect());
                } else if basis.len() < n {
                    // invariant subspace: continue with a fresh direction
                    tail_norm = 0.0;
                    if let Some(v) = fresh_direction(&basis, &mut rng, n) {
                        basis.push(v);
                    }
                }
            }
            if expanded >= next_check || expanded == m || iterations >= opts.max_iter {
                break;
            }
        }

        let s = expanded;
        let (vals, vecs) = rayleigh_ritz(&proj, s);
        let want = k.min(s);
        let estimates: Vec<f64> = (0..want).map(|i| (tail_norm * vecs[(s - 1, i)]).abs()).collect();
        let done = want == k && estimates.iter().all(|&e| e <= opts.tol);
        let exhausted = iterations >= opts.max_iter;
        let complete = s == n;
        ritz = (vals, vecs);
        if done || complete {
            converged = true;
            break;
        }
        if exhausted {
            break;
        }
        if s < m && expanded < basis.len() {
            next_check = (s + CHECK_EVERY).min(m);
            continue;
        }
        if s < m {
            // basis could not grow (space exhausted); nothing left to do
            converged = true;
            break;
        }

        // thick restart: keep `keep` smallest Ritz vectors plus the residual direction
        let (vals, vecs) = &ritz;
        let kept: Vec<Vec<f64>> = (0..keep).map(|i| combine(&basis, vecs, i, s)).collect();
        basis = kept;
        proj.fill(0.0);
        for i in 0..keep {
            proj[(i, i)] = vals[i];
        }
        if tail_norm > 0.0 {
            let mut r: Vec<f64> = w.iter().map(|x| x / tail_norm).collect();
            orthogonalize(&basis, &mut r);
            let nr = norm(&r);
            if nr > 1e-8 {
                r.iter_mut().for_each(|x| *x /= nr);
                basis.push(r);
            } else if let Some(v) = fresh_direction(&basis, &mut rng, n) {
                basis.push(v);
            }
        } else if let Some(v) = fresh_direction(&basis, &mut rng, n) {
            basis.push(v);
        }
        expanded = keep;
        next_check = (keep + CHECK_EVERY).min(m);
        restarts += 1;
    }

    let (vals, vecs) = ritz;
    let s = expanded;
    let want = k.min(s);
    let mut eigenvalues = Vec::with_capacity(want);
    let mut eigenvectors = Vec::with_capacity(want);
    let mut residuals = Vec::with_capacity(want);
    let mut ax = vec![0.0; n];
    for i in 0..want {
        let mut x = combine(&basis, &vecs, i, s);
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut ax);
        let theta = vals[i];
        residuals.push(explicit_residual(&ax, &x, theta));
        eigenvalues.push(theta);
        eigenvectors.push(x);
    }
    let orthogonality_loss = orthogonality_loss(&basis[..s.min(basis.len())]);
    let converged = converged && residuals.iter().all(|&r| r <= opts.tol);
    Ok(LanczosResult {
        eigenvalues,
        eigenvectors,
        residuals,
        converged,
        iterations,
        restarts,
        orthogonality_loss,
    })
}

/// ‖ax − θx‖
pub(crate) fn explicit_residual(ax: &[f64], x: &[f64], theta: f64) -> f64 {
    ax.iter()
        .zip(x)
        .map(|(a, b)| (a - theta * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn check_symmetry<A: LinearOperator + ?Sized>(op: &A, rng: &mut ChaCha8Rng) -> Result<(), EigsError> {
    let n = op.dim();
    let mut au = vec![0.0; n];
    let mut av = vec![0.0; n];
    for _ in 0..3 {
        let u = random_vector(rng, n);
        let v = random_vector(rng, n);
        op.apply(&u, &mut au);
        op.apply(&v, &mut av);
        let defect = (dot(&au, &v) - dot(&u, &av)).abs();
        // relative to the size of the inner products involved
        let threshold = 1e-10 * (norm(&au) * norm(&v) + norm(&u) * norm(&av)).max(f64::MIN_POSITIVE);
        if !(defect <= threshold) {
            return Err(EigsError::NotSymmetric { defect, threshold });
        }
    }
    Ok(())
}

/// Two passes of classical Gram–Schmidt against `basis`; returns the
/// accumulated projection coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut total = vec![0.0; basis.len()];
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, w)).collect();
        for (q, c) in basis.iter().zip(&coeffs) {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
        for (t, c) in total.iter_mut().zip(&coeffs) {
            *t += c;
        }
    }
    total
}

fn fresh_direction(basis: &[Vec<f64>], rng: &mut ChaCha8Rng, n: usize) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v = random_vector(rng, n);
        orthogonalize(basis, &mut v);
        let nv = norm(&v);
        if nv > 1e-6 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Eigenpairs of the leading s×s block, ascending.
fn rayleigh_ritz(proj: &DMatrix<f64>, s: usize) -> (Vec<f64>, DMatrix<f64>) {
    let block = proj.view((0, 0), (s, s)).into_owned();
    let eig = SymmetricEigen::new(block);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<f64>::zeros(s, s);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

fn combine(basis: &[Vec<f64>], vecs: &DMatrix<f64>, col: usize, s: usize) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (j, q) in basis.iter().take(s).enumerate() {
        let c = vecs[(j, col)];
        if c != 0.0 {
            for (o, qi) in out.iter_mut().zip(q) {
                *o += c * qi;
            }
        }
    }
    out
}

fn orthogonality_loss(basis: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..basis.len() {
        for j in 0..=i {
            let g = dot(&basis[i], &basis[j]) - if i == j { 1.0 } else { 0.0 };
            worst = worst.max(g.abs());
        }
    }
    worst
}
