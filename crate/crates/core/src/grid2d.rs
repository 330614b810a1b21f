//! Truncated 2D Hamiltonian as a sparse symmetric matrix, and the
//! Y-ladder scan that exposes the spectral transition.
//!
//! The y-direction is always cut at ±Y with Dirichlet conditions. When Y
//! is a multiple of `h_y` the nodes sit at integer multiples of `h_y`, so
//! the grids for a ladder of such Y values nest and the lowest eigenvalue
//! is exactly nonincreasing in Y.

use crate::eigs::{lanczos_smallest, EigsError, LanczosOptions, LinearOperator};
use crate::model::{BoundaryCondition, ModelConfig, XDomain};
use rayon::prelude::*;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("channel {channel} is under-resolved at |y| = {y}: its support of width {width:e} holds only {cells} cells (need 4)")]
    Resolution { channel: usize, y: f64, width: f64, cells: usize },
    #[error("grid of {size} unknowns exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eigs(#[from] EigsError),
    #[error("Lanczos did not converge: {iterations} steps, residuals {residuals:?}, tol {tol:e}")]
    NotConverged { iterations: usize, residuals: Vec<f64>, tol: f64 },
}

/// Default cap on n_x·n_y.
pub const DEFAULT_MAX_UNKNOWNS: usize = 4_000_000;

/// Mesh in x: all nodes including the two endpoints, plus the boundary
/// condition that selects which of them are unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct XMesh {
    nodes: Vec<f64>,
    bc: BoundaryCondition,
}

impl XMesh {
    pub fn uniform(lo: f64, hi: f64, cells: usize, bc: BoundaryCondition) -> Result<Self, GridError> {
        if !(lo < hi) || cells < 2 {
            return Err(GridError::Invalid(format!("x mesh needs lo < hi and >= 2 cells, got [{lo}, {hi}], {cells}")));
        }
        let h = (hi - lo) / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|i| lo + i as f64 * h).collect();
        nodes.push(hi);
        Ok(Self { nodes, bc })
    }

    /// Mesh whose spacing grows linearly with the distance to the nearest
    /// center, clamped to `[fine, coarse]`. Built by equidistributing the
    /// spacing function, so symmetric inputs give a symmetric mesh.
    pub fn graded(
        lo: f64,
        hi: f64,
        centers: &[f64],
        fine: f64,
        coarse: f64,
        growth: f64,
        bc: BoundaryCondition,
    ) -> Result<Self, GridError> {
        if !(lo < hi && fine > 0.0 && coarse >= fine && growth > 0.0) {
            return Err(GridError::Invalid("graded mesh needs lo < hi, 0 < fine <= coarse, growth > 0".into()));
        }
        if bc == BoundaryCondition::Periodic {
            return Err(GridError::Invalid("periodic x requires a uniform mesh".into()));
        }
        let spacing = |x: f64| {
            let d = centers.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
            let d = if d.is_finite() { d } else { hi - lo };
            (growth * d).clamp(fine, coarse)
        };
        // cumulative cell count ξ(x) = ∫ dx/Δ(x) on a dense trapezoid grid
        let samples = 200_000;
        let dx = (hi - lo) / samples as f64;
        let mut xi = vec![0.0; samples + 1];
        for i in 0..samples {
            let a = lo + i as f64 * dx;
            xi[i + 1] = xi[i] + 0.5 * dx * (1.0 / spacing(a) + 1.0 / spacing(a + dx));
        }
        let cells = xi[samples].ceil().max(2.0) as usize;
        let scale = xi[samples] / cells as f64;
        let mut nodes = Vec::with_capacity(cells + 1);
        nodes.push(lo);
        let mut j = 0;
        for c in 1..cells {
            let target = c as f64 * scale;
            while xi[j + 1] < target {
                j += 1;
            }
            let frac = (target - xi[j]) / (xi[j + 1] - xi[j]);
            nodes.push(lo + (j as f64 + frac) * dx);
        }
        nodes.push(hi);
        // enforce exact mirror symmetry when the setup is symmetric
        let symmetric = (lo + hi).abs() <= 1e-14 * hi.abs()
            && centers.iter().all(|c| centers.iter().any(|d| (c + d).abs() <= 1e-14 * (1.0 + c.abs())));
        if symmetric {
            let n = nodes.len();
            for i in 0..n / 2 {
                let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
                nodes[i] = -v;
                nodes[n - 1 - i] = v;
            }
            if n % 2 == 1 {
                nodes[n / 2] = 0.0;
            }
        }
        Ok(Self { nodes, bc })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Indices into `nodes` that carry unknowns.
    fn unknown_range(&self) -> std::ops::Range<usize> {
        let n = self.nodes.len();
        match self.bc {
            BoundaryCondition::Dirichlet => 1..n - 1,
            BoundaryCondition::Neumann => 0..n,
            BoundaryCondition::Periodic => 0..n - 1,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.unknown_range().len()
    }

    pub fn unknown_positions(&self) -> Vec<f64> {
        self.nodes[self.unknown_range()].to_vec()
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Number of whole cells inside `[a, b]`.
    fn cells_within(&self, a: f64, b: f64) -> usize {
        self.nodes.windows(2).filter(|w| w[0] >= a && w[1] <= b).count()
    }

    /// Symmetrized finite-volume −d²/dx²: (diagonal, off-diagonal, corner).
    pub fn laplacian(&self) -> (Vec<f64>, Vec<f64>, Option<f64>) {
        let x = &self.nodes;
        let n = x.len();
        let gap = |i: usize| x[i + 1] - x[i];
        let range = self.unknown_range();
        let periodic = self.bc == BoundaryCondition::Periodic;
        let left_gap = |i: usize| {
            if i > 0 {
                Some(gap(i - 1))
            } else if periodic {
                Some(gap(n - 2))
            } else {
                None
            }
        };
        let right_gap = |i: usize| if i + 1 < n { Some(gap(i)) } else { None };
        // dual cell width
        let width = |i: usize| 0.5 * (left_gap(i).unwrap_or(0.0) + right_gap(i).unwrap_or(0.0));
        let diag: Vec<f64> = range
            .clone()
            .map(|i| {
                let flux = left_gap(i).map_or(0.0, |g| 1.0 / g) + right_gap(i).map_or(0.0, |g| 1.0 / g);
                flux / width(i)
            })
            .collect();
        let off: Vec<f64> = range
            .clone()
            .take(range.len().saturating_sub(1))
            .map(|i| -1.0 / (gap(i) * (width(i) * width(i + 1)).sqrt()))
            .collect();
        let corner = periodic.then(|| -1.0 / (gap(n - 2) * (width(0) * width(n - 2)).sqrt()));
        (diag, off, corner)
    }
}

/// Tensor grid: x mesh times y ∈ (−Y, Y) with spacing `h_y` and Dirichlet ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    x: XMesh,
    y_half_width: f64,
    h_y: f64,
    n_y: usize,
    max_unknowns: usize,
}

impl Grid2D {
    /// `2·y_half_width` must be a multiple of `h_y`; y = 0 is a node when
    /// `y_half_width` itself is.
    pub fn new(x: XMesh, y_half_width: f64, h_y: f64) -> Result<Self, GridError> {
        if !(y_half_width > 1.0 && h_y > 0.0) {
            return Err(GridError::Invalid(format!("need Y > 1 and h_y > 0 (Y = {y_half_width}, h_y = {h_y})")));
        }
        let steps = 2.0 * y_half_width / h_y;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(GridError::Invalid(format!("2Y = {} is not a multiple of h_y = {h_y}", 2.0 * y_half_width)));
        }
        let n_y = steps.round() as usize - 1;
        let grid = Self {
            x,
            y_half_width,
            h_y,
            n_y,
            max_unknowns: DEFAULT_MAX_UNKNOWNS,
        };
        grid.check_size()?;
        Ok(grid)
    }

    pub fn with_max_unknowns(mut self, cap: usize) -> Result<Self, GridError> {
        self.max_unknowns = cap;
        self.check_size()?;
        Ok(self)
    }

    fn check_size(&self) -> Result<(), GridError> {
        let size = self.len();
        if size > self.max_unknowns {
            return Err(GridError::TooLarge {
                size,
                cap: self.max_unknowns,
            });
        }
        Ok(())
    }

    pub fn x_mesh(&self) -> &XMesh {
        &self.x
    }

    pub fn y_half_width(&self) -> f64 {
        self.y_half_width
    }

    pub fn h_y(&self) -> f64 {
        self.h_y
    }

    pub fn n_x(&self) -> usize {
        self.x.unknowns()
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        let lo = -0.5 * (self.n_y + 1) as f64;
        (0..self.n_y).map(|j| (lo + 1.0 + j as f64) * self.h_y).collect()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute row sum (bounds the spectral radius).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        const CHUNK: usize = 4096;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let start = c * CHUNK;
            for (k, yi) in out.iter_mut().enumerate() {
                let i = start + k;
                let mut s = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[p] * x[self.cols[p]];
                }
                *yi = s;
            }
        });
    }

    /// One `row col value` line per stored entry (0-based indices).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "% {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    matrix: CsrMatrix,
    grid: Grid2D,
}

impl SparseHamiltonian {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Scale used for relative residual tolerances.
    pub fn scale(&self) -> f64 {
        self.matrix.inf_norm().max(1.0)
    }
}

/// Channels must keep at least 4 cells across their support at |y| = Y.
fn check_resolution(config: &ModelConfig, grid: &Grid2D) -> Result<(), GridError> {
    let y = grid.y_half_width();
    for (j, ch) in config.channels().iter().enumerate() {
        if ch.lambda == 0.0 {
            continue;
        }
        let half = ch.profile.half_width() / y;
        let cells = grid.x.cells_within(ch.center - half, ch.center + half);
        if cells < 4 {
            return Err(GridError::Resolution {
                channel: j,
                y,
                width: 2.0 * half,
                cells,
            });
        }
    }
    Ok(())
}

/// Assembles Kx ⊗ I + I ⊗ Ky + diag W(x_i, y_j) with index i_x·n_y + j_y.
pub fn assemble_h2d(config: &ModelConfig, grid: &Grid2D) -> Result<SparseHamiltonian, GridError> {
    match config.x_domain() {
        XDomain::FullLine => {
            if grid.x.bc() != BoundaryCondition::Dirichlet {
                return Err(GridError::Invalid("a truncated line needs Dirichlet ends in x".into()));
            }
            let reach = config.channel_reach();
            if grid.x.lo() > -reach || grid.x.hi() < reach {
                return Err(GridError::Invalid(format!("x range must cover the channels (reach {reach})")));
            }
        }
        XDomain::Interval { half_width, bc } => {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * half_width.max(1.0);
            if !close(grid.x.lo(), -half_width) || !close(grid.x.hi(), half_width) || grid.x.bc() != bc {
                return Err(GridError::Invalid(format!(
                    "x mesh must span [-{half_width}, {half_width}] with {bc:?} ends"
                )));
            }
        }
    }
    check_resolution(config, grid)?;
    let (kd, ko, kc) = grid.x.laplacian();
    let xs = grid.x.unknown_positions();
    let ys = grid.y_nodes();
    let (nx, ny) = (xs.len(), ys.len());
    let inv_hy2 = 1.0 / (grid.h_y * grid.h_y);
    let n = nx * ny;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for i in 0..nx {
        for j in 0..ny {
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
            if i > 0 {
                entries.push(((i - 1) * ny + j, ko[i - 1]));
            }
            if let Some(c) = kc {
                if i == 0 {
                    entries.push(((nx - 1) * ny + j, c));
                } else if i == nx - 1 {
                    entries.push((j, c));
                }
            }
            if j > 0 {
                entries.push((i * ny + j - 1, -inv_hy2));
            }
            let diag = kd[i] + 2.0 * inv_hy2 + config.eval_potential_2d(xs[i], ys[j]);
            entries.push((i * ny + j, diag));
            if j + 1 < ny {
                entries.push((i * ny + j + 1, -inv_hy2));
            }
            if i + 1 < nx {
                entries.push(((i + 1) * ny + j, ko[i]));
            }
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(SparseHamiltonian {
        matrix: CsrMatrix { n, row_ptr, cols, vals },
        grid: grid.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Residual tolerance relative to ‖H‖∞.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub basis_size: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 60_000,
            seed: 0x2d5e_ed01,
            basis_size: 80,
        }
    }
}

/// The k ≤ 20 smallest eigenvalues with their residual norms
/// ‖Hv − θv‖ ≤ tol·‖H‖∞.
pub fn lowest_eigenvalues(h: &SparseHamiltonian, k: usize, opts: &EigenOptions) -> Result<Vec<(f64, f64)>, GridError> {
    if k == 0 || k > 20 {
        return Err(GridError::Invalid(format!("k must be in 1..=20, got {k}")));
    }
    let tol = opts.tol * h.scale();
    let lopts = LanczosOptions {
        max_iter: opts.max_iter,
        tol,
        seed: opts.seed,
        basis_size: opts.basis_size.max(2 * k + 16),
    };
    let r = lanczos_smallest(h.matrix(), k, &lopts)?;
    if !r.converged {
        return Err(GridError::NotConverged {
            iterations: r.iterations,
            residuals: r.residuals,
            tol,
        });
    }
    Ok(r.eigenvalues.into_iter().zip(r.residuals).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Subcritical,
    Supercritical,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Subcritical => "subcritical",
            Verdict::Supercritical => "supercritical",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Discretization and decision settings for [`transition_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPolicy {
    /// Half-width of the x truncation on the full line; `None` picks
    /// 2·reach + 2/ω.
    pub x_half_width: Option<f64>,
    pub h_y: f64,
    /// Fine x spacing is a_min / (cells_per_channel · Y_max / 2).
    pub cells_per_channel: usize,
    /// Graded x mesh (spacing growing away from the channel centers).
    pub graded: bool,
    /// Spacing growth per unit distance for the graded mesh.
    pub growth: f64,
    /// Coarsest x spacing as a fraction of min(a_min, 1/ω).
    pub coarse_fraction: f64,
    pub eigen: EigenOptions,
    /// Relative drift bound for the subcritical verdict.
    pub stability_tol: f64,
    pub min_r2: f64,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        Self {
            x_half_width: None,
            h_y: 0.125,
            cells_per_channel: 8,
            graded: true,
            growth: 0.08,
            coarse_fraction: 0.125,
            eigen: EigenOptions::default(),
            stability_tol: 0.01,
            min_r2: 0.95,
        }
    }
}

impl ScanPolicy {
    /// x mesh shared by every Y of a ladder ending at `y_max`.
    pub fn x_mesh(&self, config: &ModelConfig, y_max: f64) -> Result<XMesh, GridError> {
        let omega = config.omega();
        let a_min = config
            .channels()
            .iter()
            .map(|c| c.profile.half_width())
            .fold(f64::INFINITY, f64::min);
        let a_min = if a_min.is_finite() { a_min } else { 1.0 };
        let fine = 2.0 * a_min / (self.cells_per_channel as f64 * y_max);
        let coarse = (self.coarse_fraction * a_min.min(1.0 / omega)).max(fine);
        let (lo, hi, bc) = match config.x_domain() {
            XDomain::FullLine => {
                let x = self
                    .x_half_width
                    .unwrap_or(2.0 * config.channel_reach() + 2.0 / omega);
                (-x, x, BoundaryCondition::Dirichlet)
            }
            XDomain::Interval { half_width, bc } => (-half_width, half_width, bc),
        };
        let centers: Vec<f64> = config.channels().iter().map(|c| c.center).collect();
        if self.graded && bc != BoundaryCondition::Periodic && !centers.is_empty() {
            XMesh::graded(lo, hi, &centers, fine, coarse, self.growth, bc)
        } else {
            XMesh::uniform(lo, hi, ((hi - lo) / fine).ceil() as usize, bc)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub y: f64,
    pub lambda0: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// c in λ₀ ≈ α − cY² fitted on the last half of the ladder.
    pub c_fit: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// |λ₀(Y_max) − λ₀(Y_ref)| / max(|λ₀(Y_max)|, 1) with Y_ref nearest Y_max/2.
    pub drift: f64,
    pub verdict: Verdict,
    pub n_x: usize,
}

impl ScanReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("Y,lambda0,c_fit,verdict\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.12e},{:.12e},{}\n", r.y, r.lambda0, self.c_fit, self.verdict.as_str()));
        }
        s
    }
}

/// Least squares for v ≈ α − c·Y²: returns (c, α, R²).
pub fn fit_quadratic_plunge(ys: &[f64], vs: &[f64]) -> (f64, f64, f64) {
    let n = ys.len() as f64;
    let xs: Vec<f64> = ys.iter().map(|y| y * y).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxv: f64 = xs.iter().zip(vs).map(|(x, v)| (x - mx) * (v - mv)).sum();
    let slope = if sxx > 0.0 { sxv / sxx } else { 0.0 };
    let intercept = mv - slope * mx;
    let ss_tot: f64 = vs.iter().map(|v| (v - mv).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(vs)
        .map(|(x, v)| (v - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    (-slope, intercept, r2)
}

/// Lowest eigenvalue λ₀(Y) along an increasing Y ladder (≥ 3 entries).
///
/// Subcritical when λ₀ has settled between the entry nearest Y_max/2 and
/// Y_max; supercritical when it plunges like −cY² (c > 0, R² ≥ min_r2);
/// anything else is reported as inconclusive.
pub fn transition_scan(config: &ModelConfig, ladder: &[f64], policy: &ScanPolicy) -> Result<ScanReport, GridError> {
    if ladder.len() < 3 || ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GridError::Invalid("Y ladder must be strictly increasing with >= 3 entries".into()));
    }
    let y_max = ladder[ladder.len() - 1];
    let mesh = policy.x_mesh(config, y_max)?;
    let grids = ladder
        .iter()
        .map(|&y| Grid2D::new(mesh.clone(), y, policy.h_y))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = grids
        .par_iter()
        .map(|g| {
            let h = assemble_h2d(config, g)?;
            let (lambda0, residual) = lowest_eigenvalues(&h, 1, &policy.eigen)?[0];
            Ok(ScanRow {
                y: g.y_half_width(),
                lambda0,
                residual,
            })
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    let start = rows.len() / 2;
    let tail_y: Vec<f64> = rows[start..].iter().map(|r| r.y).collect();
    let tail_v: Vec<f64> = rows[start..].iter().map(|r| r.lambda0).collect();
    let (c_fit, intercept, r_squared) = fit_quadratic_plunge(&tail_y, &tail_v);
    let last = rows[rows.len() - 1].lambda0;
    let reference = rows
        .iter()
        .min_by(|a, b| (a.y - 0.5 * y_max).abs().total_cmp(&(b.y - 0.5 * y_max).abs()))
        .expect("ladder has entries")
        .lambda0;
    let drift = (last - reference).abs() / last.abs().max(1.0);
    let verdict = if drift <= policy.stability_tol {
        Verdict::Subcritical
    } else if c_fit > 0.0 && r_squared >= policy.min_r2 {
        Verdict::Supercritical
    } else {
        Verdict::Inconclusive
    };
    Ok(ScanReport {
        rows,
        c_fit,
        intercept,
        r_squared,
        drift,
        verdict,
        n_x: mesh.unknowns(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigs::{sturm_smallest, TridiagonalSym};
    use crate::model::{ChannelSpec, PotentialProfile};
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free(omega: f64) -> ModelConfig {
        ModelConfig::new(omega, vec![], XDomain::FullLine).unwrap()
    }

    fn small_grid(x: f64, cells: usize, y: f64, h_y: f64) -> Grid2D {
        Grid2D::new(XMesh::uniform(-x, x, cells, BoundaryCondition::Dirichlet).unwrap(), y, h_y).unwrap()
    }

    fn dense(m: &CsrMatrix) -> DMatrix<f64> {
        let n = m.dim();
        DMatrix::from_fn(n, n, |i, j| m.get(i, j))
    }

    #[test]
    fn separable_assembly_is_kronecker_sum() {
        let g = small_grid(2.0, 6, 1.5, 0.5);
        let h = assemble_h2d(&free(1.0), &g).unwrap();
        let (nx, ny) = (g.n_x(), g.n_y());
        let hx = 4.0 / 6.0;
        let ys = g.y_nodes();
        for i in 0..nx {
            for j in 0..ny {
                let r = i * ny + j;
                let diag = 2.0 / (hx * hx) + 2.0 / 0.25 + ys[j] * ys[j];
                assert!((h.matrix().get(r, r) - diag).abs() < 1e-12);
                if j + 1 < ny {
                    assert_eq!(h.matrix().get(r, r + 1), -4.0);
                }
                if i + 1 < nx {
                    assert!((h.matrix().get(r, r + ny) + 1.0 / (hx * hx)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_symmetry_and_five_point_pattern() {
        let p = PotentialProfile::cosine(1.0, 1.0).unwrap();
        let cfg = ModelConfig::single_channel(1.0, 3.0, p).unwrap();
        let g = small_grid(2.0, 64, 3.0, 0.25);
        let h = assemble_h2d(&cfg, &g).unwrap();
        let m = h.matrix();
        let hx = 4.0 / 64.0;
        let cfg_ref = &cfg;
        let min_w = g
            .x_mesh()
            .unknown_positions()
            .iter()
            .flat_map(|&x| g.y_nodes().into_iter().map(move |y| cfg_ref.eval_potential_2d(x, y)))
            .fold(f64::INFINITY, f64::min);
        for i in 0..m.dim() {
            assert!(m.row(i).count() <= 5);
            for (j, v) in m.row(i) {
                assert_eq!(v, m.get(j, i));
            }
            assert!(m.get(i, i) >= 2.0 / (hx * hx) + 2.0 / 0.0625 + min_w - 1e-9);
        }
    }

    #[test]
    fn zero_channel_spectrum_is_sum_of_1d_spectra() {
        let g = small_grid(1.5, 7, 1.5, 0.5);
        let h = assemble_h2d(&free(1.0), &g).unwrap();
        let eig = SymmetricEigen::new(dense(h.matrix()));
        let mut full: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        full.sort_by(f64::total_cmp);
        let (kd, ko, _) = g.x_mesh().laplacian();
        let tx = TridiagonalSym::new(kd, ko).unwrap();
        let ex = sturm_smallest(&tx, tx.len(), 1e-13).unwrap();
        let ys = g.y_nodes();
        let dy: Vec<f64> = ys.iter().map(|y| 8.0 + y * y).collect();
        let ty = TridiagonalSym::new(dy, vec![-4.0; ys.len() - 1]).unwrap();
        let ey = sturm_smallest(&ty, ty.len(), 1e-13).unwrap();
        let mut sums: Vec<f64> = ex.iter().flat_map(|a| ey.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (a, b) in full.iter().zip(&sums) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_matrix_smallest_entries() {
        let n = 300;
        let vals: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
        let m = CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vals.clone(),
        };
        let h = SparseHamiltonian {
            matrix: m,
            grid: small_grid(1.5, 4, 2.0, 0.5),
        };
        let ev = lowest_eigenvalues(&h, 3, &EigenOptions::default()).unwrap();
        for (i, (e, _)) in ev.iter().enumerate() {
            assert!((e - i as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_matches_randomized_rayleigh_minimum() {
        let p = PotentialProfile::cosine(1.0, 1.0).unwrap();
        let cfg = ModelConfig::single_channel(1.0, 2.0, p).unwrap();
        let g = small_grid(1.2, 8, 1.25, 0.25);
        let h = assemble_h2d(&cfg, &g).unwrap();
        let a = dense(h.matrix());
        let n = a.nrows();
        let lanczos = lowest_eigenvalues(&h, 1, &EigenOptions::default()).unwrap()[0].0;
        // coordinate-wise exact Rayleigh quotient minimization from random starts
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best = f64::INFINITY;
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut ax: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
            let mut xx: f64 = x.iter().map(|v| v * v).sum();
            let mut xax: f64 = x.iter().zip(&ax).map(|(p, q)| p * q).sum();
            for _ in 0..50 {
                for i in 0..n {
                    // minimize (xax + 2t·ax_i + t²a_ii)/(xx + 2t·x_i + t²) over t
                    let (p, q, r) = (xax, ax[i], a[(i, i)]);
                    let (s, u) = (xx, x[i]);
                    let c2 = q - r * u;
                    let c1 = p - r * s;
                    let c0 = p * u - q * s;
                    let t = if c2.abs() < 1e-300 {
                        -c0 / c1
                    } else {
                        let disc = (c1 * c1 - 4.0 * c2 * c0).max(0.0).sqrt();
                        let t1 = (-c1 + disc) / (2.0 * c2);
                        let t2 = (-c1 - disc) / (2.0 * c2);
                        let rq = |t: f64| (p + 2.0 * t * q + t * t * r) / (s + 2.0 * t * u + t * t);
                        if rq(t1) < rq(t2) { t1 } else { t2 }
                    };
                    if !t.is_finite() {
                        continue;
                    }
                    x[i] += t;
                    for k in 0..n {
                        ax[k] += t * a[(k, i)];
                    }
                    xx += 2.0 * t * u + t * t;
                    xax += 2.0 * t * q + t * t * r;
                }
            }
            best = best.min(xax / xx);
        }
        assert!((best - lanczos).abs() < 1e-8, "{best} vs {lanczos}");
    }

    #[test]
    fn free_ground_energy_approaches_oscillator_plus_box() {
        let x = 2.0;
        let g = small_grid(x, 64, 6.0, 0.0625);
        let h = assemble_h2d(&free(1.0), &g).unwrap();
        let e = lowest_eigenvalues(&h, 1, &EigenOptions::default()).unwrap()[0].0;
        let exact = 1.0 + (std::f64::consts::PI / (2.0 * x)).powi(2);
        assert!(e >= 1.0 - 1e-6);
        assert!((e - exact).abs() < 5e-3, "{e} vs {exact}");
    }

    #[test]
    fn resolution_check_names_channel() {
        let p = PotentialProfile::cosine(0.5, 1.0).unwrap();
        let ch = vec![
            ChannelSpec::new(1.0, -1.0, PotentialProfile::cosine(0.5, 1.0).unwrap()).unwrap(),
            ChannelSpec::new(1.0, 1.0, p).unwrap(),
        ];
        let cfg = ModelConfig::new(1.0, ch, XDomain::FullLine).unwrap();
        let g = small_grid(2.0, 40, 8.0, 0.5);
        assert!(matches!(
            assemble_h2d(&cfg, &g),
            Err(GridError::Resolution { channel: 0, .. })
        ));
    }

    #[test]
    fn graded_mesh_is_symmetric_and_nests_fine_cells() {
        let m = XMesh::graded(-3.0, 3.0, &[0.0], 0.01, 0.2, 0.1, BoundaryCondition::Dirichlet).unwrap();
        let nodes = m.nodes();
        let n = nodes.len();
        for i in 0..n {
            assert_eq!(nodes[i], -nodes[n - 1 - i]);
        }
        assert!(m.min_spacing() > 0.005 && m.min_spacing() <= 0.0101);
        let (d, o, _) = m.laplacian();
        assert_eq!(d.len(), o.len() + 1);
    }

    #[test]
    fn neumann_free_x_gives_oscillator_ground_energy() {
        let mesh = XMesh::graded(-1.0, 1.0, &[0.0], 0.05, 0.2, 0.2, BoundaryCondition::Neumann).unwrap();
        let cfg = ModelConfig::new(
            1.0,
            vec![],
            XDomain::Interval {
                half_width: 1.0,
                bc: BoundaryCondition::Neumann,
            },
        )
        .unwrap();
        let g = Grid2D::new(mesh, 6.0, 0.0625).unwrap();
        let h = assemble_h2d(&cfg, &g).unwrap();
        let e = lowest_eigenvalues(&h, 1, &EigenOptions::default()).unwrap()[0].0;
        // constant mode in x, discrete oscillator in y
        assert!((e - 1.0).abs() < 2e-3, "{e}");
    }

    #[test]
    fn plunge_fit_recovers_exact_law() {
        let ys = [10.0, 12.0, 14.0, 16.0];
        let vs: Vec<f64> = ys.iter().map(|y| 3.0 - 0.7 * y * y).collect();
        let (c, a, r2) = fit_quadratic_plunge(&ys, &vs);
        assert!((c - 0.7).abs() < 1e-12 && (a - 3.0).abs() < 1e-9 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_export_lists_entries() {
        let g = small_grid(1.5, 3, 1.5, 0.5);
        let h = assemble_h2d(&free(1.0), &g).unwrap();
        let mut buf = Vec::new();
        h.matrix().write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + h.matrix().nnz());
    }
}
