//! The 1D comparison operator `L = −d²/dx² + ω² − Σ λ_j V_j(x − b_j)`.
//!
//! Its threshold `inf σ(L)` decides the fate of the 2D model: positive
//! means the 2D spectrum is bounded below, negative means it is the whole
//! real line. Everything here is a three-point finite-difference
//! discretization solved with Sturm bisection and inverse iteration
//! (Lanczos for periodic wrap-around).

use crate::eigs::{inverse_iteration, lanczos_smallest, sturm_smallest, EigsError, LanczosOptions, TridiagonalSym};
use crate::interp::QuinticHermite;
use crate::model::{BoundaryCondition, ConfigError, PotentialProfile};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnedError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eigs(#[from] EigsError),
    #[error("grid [{lo}, {hi}] does not match the comparison domain: {reason}")]
    GridMismatch { lo: f64, hi: f64, reason: String },
    #[error("Richardson refinement disagreement: E(h) = {coarse}, E(h/2) = {fine}, allowed gap {tol:e}")]
    Refinement { coarse: f64, fine: f64, tol: f64 },
    #[error("no sign change of the threshold for coupling up to {cap}")]
    NoTransition { cap: f64 },
    #[error("bisection stalled at lambda = {lambda} with |E - target| = {defect:e} > {tol:e}")]
    Stalled { lambda: f64, defect: f64, tol: f64 },
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Uniform grid with `n` interior points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self, OnedError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || n == 0 {
            return Err(OnedError::Invalid(format!("grid needs lo < hi and n > 0 (got [{lo}, {hi}], n = {n})")));
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid on `[lo, hi]` with spacing at most `h`.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Result<Self, OnedError> {
        let cells = ((hi - lo) / h).ceil().max(2.0) as usize;
        Self::new(lo, hi, cells - 1)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn interior(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n + 1) as f64
    }

    /// Node `i` for `i = 0..=n+1`; 0 and n+1 are the endpoints.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n + 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    /// The grid with half the spacing (nodes nest).
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n + 1,
            ..*self
        }
    }
}

/// One potential well `λ V(x − center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Well {
    pub lambda: f64,
    pub center: f64,
    pub profile: PotentialProfile,
}

impl Well {
    fn reach(&self) -> f64 {
        self.center.abs() + self.profile.half_width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComparisonDomain {
    /// The whole line; truncation to `[−X, X]` with Dirichlet ends is
    /// chosen automatically.
    FullLine,
    TruncatedLine { half_width: f64 },
    Interval { half_width: f64, bc: BoundaryCondition },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSpec {
    omega: f64,
    wells: Vec<Well>,
    domain: ComparisonDomain,
}

impl ComparisonSpec {
    /// Single well centered at the origin.
    pub fn new(omega: f64, lambda: f64, profile: PotentialProfile, domain: ComparisonDomain) -> Result<Self, OnedError> {
        Self::with_wells(omega, vec![Well { lambda, center: 0.0, profile }], domain)
    }

    pub fn full_line(omega: f64, lambda: f64, profile: PotentialProfile) -> Result<Self, OnedError> {
        Self::new(omega, lambda, profile, ComparisonDomain::FullLine)
    }

    pub fn with_wells(omega: f64, wells: Vec<Well>, domain: ComparisonDomain) -> Result<Self, OnedError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ConfigError::InvalidParameter {
                name: "omega",
                value: omega,
                reason: "must be finite and > 0",
            }
            .into());
        }
        for w in &wells {
            if !(w.lambda.is_finite() && w.lambda >= 0.0) {
                return Err(ConfigError::InvalidParameter {
                    name: "lambda",
                    value: w.lambda,
                    reason: "must be finite and >= 0",
                }
                .into());
            }
        }
        let spec = Self { omega, wells, domain };
        match domain {
            ComparisonDomain::FullLine => {}
            ComparisonDomain::TruncatedLine { half_width } => {
                let need = 4.0 * spec.reach() + 4.0 / omega;
                if !(half_width >= need) {
                    return Err(OnedError::Invalid(format!(
                        "truncation half-width {half_width} is below 4a + 4/omega = {need}"
                    )));
                }
            }
            ComparisonDomain::Interval { half_width, .. } => {
                if !(half_width > 0.0 && half_width >= spec.reach() * (1.0 - 1e-12)) {
                    return Err(OnedError::Invalid(format!(
                        "interval half-width {half_width} does not contain the wells (reach {})",
                        spec.reach()
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn wells(&self) -> &[Well] {
        &self.wells
    }

    pub fn domain(&self) -> ComparisonDomain {
        self.domain
    }

    /// Coupling of the first well (the single-channel case).
    pub fn lambda(&self) -> f64 {
        self.wells.first().map_or(0.0, |w| w.lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        if let Some(w) = out.wells.first_mut() {
            w.lambda = lambda;
        }
        out
    }

    pub fn with_domain(&self, domain: ComparisonDomain) -> Result<Self, OnedError> {
        Self::with_wells(self.omega, self.wells.clone(), domain)
    }

    fn reach(&self) -> f64 {
        self.wells.iter().map(Well::reach).fold(0.0, f64::max)
    }

    fn min_half_width(&self) -> f64 {
        self.wells
            .iter()
            .map(|w| w.profile.half_width())
            .fold(f64::INFINITY, f64::min)
    }

    /// ω² − Σ λ_j V_j(x − b_j)
    pub fn potential(&self, x: f64) -> f64 {
        let mut q = self.omega * self.omega;
        for w in &self.wells {
            if w.lambda != 0.0 {
                q -= w.lambda * w.profile.value(x - w.center);
            }
        }
        q
    }

    /// Where the ground state should be positive: the peak of the deepest well.
    fn anchor(&self) -> f64 {
        self.wells
            .iter()
            .max_by(|a, b| (a.lambda * a.profile.max_value()).total_cmp(&(b.lambda * b.profile.max_value())))
            .map_or(0.0, |w| w.center + w.profile.peak())
    }

    fn boundary_condition(&self) -> BoundaryCondition {
        match self.domain {
            ComparisonDomain::Interval { bc, .. } => bc,
            _ => BoundaryCondition::Dirichlet,
        }
    }
}

/// Discretization controls for [`threshold`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPolicy {
    /// Coarse grid spacing as a fraction of the narrowest well half-width.
    pub cells_per_half_width: usize,
    /// Allowed |E(h) − E(h/2)| relative to max(1, |E|).
    pub refinement_tol: f64,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        Self {
            cells_per_half_width: 200,
            refinement_tol: 1e-3,
        }
    }
}

impl ResolutionPolicy {
    fn spacing(&self, spec: &ComparisonSpec) -> f64 {
        let a = spec.min_half_width();
        let a = if a.is_finite() { a } else { 1.0 };
        a / self.cells_per_half_width as f64
    }
}

/// x-coordinates of the unknowns for a boundary condition.
fn unknown_nodes(grid: &Grid1D, bc: BoundaryCondition) -> Vec<f64> {
    let n = grid.interior();
    match bc {
        BoundaryCondition::Dirichlet => (1..=n).map(|i| grid.node(i)).collect(),
        BoundaryCondition::Neumann => (0..=n + 1).map(|i| grid.node(i)).collect(),
        BoundaryCondition::Periodic => (0..=n).map(|i| grid.node(i)).collect(),
    }
}

fn check_grid(spec: &ComparisonSpec, grid: &Grid1D) -> Result<(), OnedError> {
    let mismatch = |reason: String| OnedError::GridMismatch {
        lo: grid.lo(),
        hi: grid.hi(),
        reason,
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    match spec.domain {
        ComparisonDomain::FullLine => {
            let r = spec.reach();
            if grid.lo() > -r || grid.hi() < r {
                return Err(mismatch(format!("grid must cover the wells (reach {r})")));
            }
        }
        ComparisonDomain::TruncatedLine { half_width } | ComparisonDomain::Interval { half_width, .. } => {
            if !close(grid.lo(), -half_width) || !close(grid.hi(), half_width) {
                return Err(mismatch(format!("expected [-{half_width}, {half_width}]")));
            }
        }
    }
    Ok(())
}

/// Three-point discretization of L on `grid`.
///
/// Dirichlet drops the boundary nodes. Neumann keeps them with mirrored
/// ghosts; the resulting matrix is symmetrized with trapezoid weights, so
/// its eigenvectors are the nodal values scaled by √w (w = ½ at the ends).
/// Periodic identifies the two ends and carries a corner entry.
pub fn assemble_comparison(spec: &ComparisonSpec, grid: &Grid1D) -> Result<TridiagonalSym, OnedError> {
    check_grid(spec, grid)?;
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let bc = spec.boundary_condition();
    let xs = unknown_nodes(grid, bc);
    let m = xs.len();
    let diag: Vec<f64> = xs.iter().map(|&x| 2.0 * inv_h2 + spec.potential(x)).collect();
    let mut off = vec![-inv_h2; m - 1];
    let t = match bc {
        BoundaryCondition::Dirichlet => TridiagonalSym::new(diag, off)?,
        BoundaryCondition::Neumann => {
            off[0] = -std::f64::consts::SQRT_2 * inv_h2;
            off[m - 2] = -std::f64::consts::SQRT_2 * inv_h2;
            TridiagonalSym::new(diag, off)?
        }
        BoundaryCondition::Periodic => TridiagonalSym::periodic(diag, off, -inv_h2)?,
    };
    Ok(t)
}

/// Smallest eigenpair of an assembled comparison matrix.
fn lowest_pair(t: &TridiagonalSym) -> Result<(f64, Vec<f64>), OnedError> {
    let (glo, ghi) = t.gershgorin();
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    if t.is_periodic() {
        let opts = LanczosOptions {
            tol: 1e-11 * scale,
            max_iter: 200_000,
            basis_size: 96,
            ..Default::default()
        };
        let r = lanczos_smallest(t, 1, &opts)?;
        if !r.converged {
            return Err(EigsError::NotConverged {
                iterations: r.iterations,
                residual: r.max_residual(),
                tol: opts.tol,
            }
            .into());
        }
        return Ok((r.eigenvalues[0], r.eigenvectors[0].clone()));
    }
    let e = sturm_smallest(t, 1, 4.0 * f64::EPSILON * scale)?[0];
    let tol = 64.0 * f64::EPSILON * scale * (t.len() as f64).sqrt();
    let v = inverse_iteration(t, e, tol)?;
    Ok((e, v.vector))
}

fn lowest_eigenvalue(t: &TridiagonalSym) -> Result<f64, OnedError> {
    if t.is_periodic() {
        return lowest_pair(t).map(|p| p.0);
    }
    let (glo, ghi) = t.gershgorin();
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    Ok(sturm_smallest(t, 1, 4.0 * f64::EPSILON * scale)?[0])
}

/// Discrete ground state of L together with the data needed to evaluate
/// h, h′ and h″ anywhere on the line.
#[derive(Debug, Clone)]
pub struct GroundState {
    threshold: f64,
    spec: ComparisonSpec,
    grid: Grid1D,
    /// Nodal positions covered by the interpolant (ascending).
    xs: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    curvatures: Vec<f64>,
    /// Exponential tails beyond these nodes (line domains only).
    tail: Option<(usize, usize, f64)>,
    no_isolated_eigenvalue: bool,
}

/// Minimal eigenpair of L on `grid`, normalized in the discrete L² norm
/// and positive at the deepest point of the potential.
pub fn ground_state(spec: &ComparisonSpec, grid: &Grid1D) -> Result<GroundState, OnedError> {
    let t = assemble_comparison(spec, grid)?;
    let (e0, mut v) = lowest_pair(&t)?;
    let bc = spec.boundary_condition();
    let nodes = unknown_nodes(grid, bc);
    let h = grid.spacing();
    if bc == BoundaryCondition::Neumann {
        let m = v.len();
        v[0] *= std::f64::consts::SQRT_2;
        v[m - 1] *= std::f64::consts::SQRT_2;
    }
    // quadrature weights matching the symmetrization
    let weight = |i: usize| {
        if bc == BoundaryCondition::Neumann && (i == 0 || i + 1 == nodes.len()) {
            0.5
        } else {
            1.0
        }
    };
    let norm2: f64 = v.iter().enumerate().map(|(i, x)| weight(i) * x * x).sum::<f64>() * h;
    let anchor = spec.anchor();
    let idx = nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - anchor).abs().total_cmp(&(b.1 - anchor).abs()))
        .map_or(0, |p| p.0);
    let sign = if v[idx] < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / norm2.sqrt();
    v.iter_mut().for_each(|x| *x *= scale);

    // Extend to the full node set: Dirichlet endpoints carry zeros,
    // periodic repeats the first value at the far end.
    let mut xs = nodes.clone();
    let mut values = v;
    match bc {
        BoundaryCondition::Dirichlet => {
            xs.insert(0, grid.lo());
            xs.push(grid.hi());
            values.insert(0, 0.0);
            values.push(0.0);
        }
        BoundaryCondition::Periodic => {
            xs.push(grid.hi());
            values.push(values[0]);
        }
        BoundaryCondition::Neumann => {}
    }
    let m = values.len();
    let sample = |i: isize| -> f64 {
        if i >= 0 && (i as usize) < m {
            return values[i as usize];
        }
        match bc {
            // odd reflection through a zero end value
            BoundaryCondition::Dirichlet => {
                if i < 0 {
                    -values[(-i) as usize]
                } else {
                    -values[2 * (m - 1) - i as usize]
                }
            }
            BoundaryCondition::Neumann => {
                if i < 0 {
                    values[(-i) as usize]
                } else {
                    values[2 * (m - 1) - i as usize]
                }
            }
            BoundaryCondition::Periodic => {
                let p = (m - 1) as isize;
                values[i.rem_euclid(p) as usize]
            }
        }
    };
    let slopes: Vec<f64> = (0..m as isize)
        .map(|i| (-sample(i + 2) + 8.0 * sample(i + 1) - 8.0 * sample(i - 1) + sample(i - 2)) / (12.0 * h))
        .collect();
    let curvatures: Vec<f64> = xs
        .iter()
        .zip(&values)
        .map(|(&x, &hv)| (spec.potential(x) - e0) * hv)
        .collect();

    let omega2 = spec.omega * spec.omega;
    let tail = match spec.domain {
        ComparisonDomain::Interval { .. } => None,
        _ => {
            let kappa = (omega2 - e0).max(0.0).sqrt();
            let reach = spec.reach();
            let right_edge = reach + 0.5 * (grid.hi() - reach);
            let left_edge = -reach + 0.5 * (grid.lo() + reach);
            let right = xs.iter().rposition(|&x| x <= right_edge).unwrap_or(m - 1);
            let left = xs.iter().position(|&x| x >= left_edge).unwrap_or(0);
            Some((left, right, kappa))
        }
    };
    Ok(GroundState {
        threshold: e0,
        spec: spec.clone(),
        grid: *grid,
        xs,
        values,
        slopes,
        curvatures,
        tail,
        no_isolated_eigenvalue: e0 >= omega2 - 1e-8 * omega2.max(1.0),
    })
}

impl GroundState {
    /// E₀, the minimal eigenvalue of the discretized operator.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn spec(&self) -> &ComparisonSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn omega(&self) -> f64 {
        self.spec.omega
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda()
    }

    /// Nodal positions and normalized samples (including zero Dirichlet ends).
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.values.iter().copied())
    }

    /// Set when no eigenvalue below ω² was detected (E₀ ≥ ω² up to 1e−8).
    pub fn no_isolated_eigenvalue(&self) -> bool {
        self.no_isolated_eigenvalue
    }

    /// Decay rate √(ω² − E₀) of the exponential tails.
    pub fn decay_rate(&self) -> f64 {
        (self.spec.omega * self.spec.omega - self.threshold).max(0.0).sqrt()
    }

    /// Range `[lo, hi]` on which the sampled interpolant is used; outside it
    /// the exponential tail (line domains) or zero (intervals) takes over.
    pub fn interpolation_range(&self) -> (f64, f64) {
        match self.tail {
            Some((l, r, _)) => (self.xs[l], self.xs[r]),
            None => (self.xs[0], self.xs[self.xs.len() - 1]),
        }
    }

    /// Breakpoints of the piecewise representation inside `[lo, hi]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.interpolation_range();
        let mut out: Vec<f64> = self.xs.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
        for w in &self.spec.wells {
            out.extend(w.profile.kinks().into_iter().map(|k| k + w.center));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Quintic Hermite interpolant on the cell containing `t`: (h, h′, h″).
    fn interpolate(&self, t: f64, lo: usize, hi: usize) -> [f64; 3] {
        let i = match self.xs[lo..=hi].partition_point(|&x| x <= t) {
            0 => lo,
            p => (lo + p - 1).min(hi - 1),
        };
        let cell = QuinticHermite::new(
            self.xs[i],
            self.xs[i + 1],
            [self.values[i], self.slopes[i], self.curvatures[i]],
            [self.values[i + 1], self.slopes[i + 1], self.curvatures[i + 1]],
        );
        cell.eval(t)
    }

    /// (h, h′) with h′ from the interpolant (or the exact tail).
    pub fn value_and_slope(&self, t: f64) -> (f64, f64) {
        match self.tail {
            Some((l, r, kappa)) => {
                if t > self.xs[r] {
                    let v = self.values[r] * (-kappa * (t - self.xs[r])).exp();
                    (v, -kappa * v)
                } else if t < self.xs[l] {
                    let v = self.values[l] * (-kappa * (self.xs[l] - t)).exp();
                    (v, kappa * v)
                } else {
                    let [v, d, _] = self.interpolate(t, l, r);
                    (v, d)
                }
            }
            None => {
                let last = self.xs.len() - 1;
                if t < self.xs[0] || t > self.xs[last] {
                    (0.0, 0.0)
                } else {
                    let [v, d, _] = self.interpolate(t, 0, last);
                    (v, d)
                }
            }
        }
    }

    /// Second derivative of the interpolant itself (not the ODE value).
    pub fn interpolant_curvature(&self, t: f64) -> f64 {
        let (lo, hi) = match self.tail {
            Some((l, r, kappa)) => {
                if t > self.xs[r] || t < self.xs[l] {
                    return kappa * kappa * self.value_and_slope(t).0;
                }
                (l, r)
            }
            None => (0, self.xs.len() - 1),
        };
        if t < self.xs[lo] || t > self.xs[hi] {
            return 0.0;
        }
        self.interpolate(t, lo, hi)[2]
    }
}

/// (h, h′, h″) at `t`: h and h′ from the interpolant or tail, h″ from the
/// eigenvalue equation h″ = (ω² − λV − E₀) h.
pub fn h_derivatives(gs: &GroundState, t: f64) -> (f64, f64, f64) {
    let (h, dh) = gs.value_and_slope(t);
    (h, dh, (gs.spec.potential(t) - gs.threshold) * h)
}

/// Minimal eigenvalue on a grid of spacing ≈ `h` (without extrapolation).
fn discrete_threshold(spec: &ComparisonSpec, half_width: f64, h: f64) -> Result<(f64, Grid1D), OnedError> {
    let grid = Grid1D::with_spacing(-half_width, half_width, h)?;
    let t = assemble_comparison(spec, &grid)?;
    Ok((lowest_eigenvalue(&t)?, grid))
}

fn richardson(spec: &ComparisonSpec, grid: &Grid1D, policy: &ResolutionPolicy) -> Result<f64, OnedError> {
    let coarse = lowest_eigenvalue(&assemble_comparison(spec, grid)?)?;
    let fine = lowest_eigenvalue(&assemble_comparison(spec, &grid.refined())?)?;
    let tol = policy.refinement_tol * fine.abs().max(1.0);
    if (coarse - fine).abs() > tol {
        return Err(OnedError::Refinement { coarse, fine, tol });
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Automatic truncation half-width for a full-line spec: start from
/// max(a + 12/√(ω² + 1), 4a + 4/ω) and double until the discrete minimum
/// moves by less than 1e−9 (or reaches the essential threshold ω²).
pub fn auto_truncation(spec: &ComparisonSpec, policy: &ResolutionPolicy) -> Result<f64, OnedError> {
    let omega = spec.omega;
    let reach = spec.reach();
    let h = policy.spacing(spec);
    let mut x = (reach + 12.0 / (omega * omega + 1.0).sqrt()).max(4.0 * reach + 4.0 / omega);
    let (mut prev, _) = discrete_threshold(spec, x, h)?;
    for _ in 0..6 {
        if prev >= omega * omega {
            break;
        }
        let next_x = 2.0 * x;
        let (e, _) = discrete_threshold(spec, next_x, h)?;
        let moved = (e - prev).abs();
        x = next_x;
        prev = e;
        if moved < 1e-9 {
            break;
        }
    }
    Ok(x)
}

/// Richardson-extrapolated threshold inf σ(L) over the resolutions (h, h/2).
///
/// On the full line the result is capped at ω², the bottom of the
/// essential spectrum.
pub fn threshold(spec: &ComparisonSpec, policy: &ResolutionPolicy) -> Result<f64, OnedError> {
    let h = policy.spacing(spec);
    let omega2 = spec.omega * spec.omega;
    match spec.domain {
        ComparisonDomain::FullLine => {
            let x = auto_truncation(spec, policy)?;
            let grid = Grid1D::with_spacing(-x, x, h)?;
            Ok(richardson(spec, &grid, policy)?.min(omega2))
        }
        ComparisonDomain::TruncatedLine { half_width } | ComparisonDomain::Interval { half_width, .. } => {
            let grid = Grid1D::with_spacing(-half_width, half_width, h)?;
            richardson(spec, &grid, policy)
        }
    }
}

/// Ground state on the fine grid used by [`threshold`].
pub fn resolved_ground_state(spec: &ComparisonSpec, policy: &ResolutionPolicy) -> Result<GroundState, OnedError> {
    let h = policy.spacing(spec);
    let half_width = match spec.domain {
        ComparisonDomain::FullLine => auto_truncation(spec, policy)?,
        ComparisonDomain::TruncatedLine { half_width } | ComparisonDomain::Interval { half_width, .. } => half_width,
    };
    let grid = Grid1D::with_spacing(-half_width, half_width, h)?.refined();
    ground_state(spec, &grid)
}

const LAMBDA_CAP: f64 = 65536.0;

/// Bisection for the coupling at which the full-line threshold equals
/// `target`; `E(λ)` is nonincreasing so the bracket is found by doubling.
fn bisect_coupling(
    omega: f64,
    profile: &PotentialProfile,
    target: f64,
    tol: f64,
    policy: &ResolutionPolicy,
) -> Result<f64, OnedError> {
    if !(tol > 0.0) {
        return Err(OnedError::Invalid("tol must be > 0".into()));
    }
    let base = ComparisonSpec::full_line(omega, 0.0, profile.clone())?;
    let energy = |lambda: f64| threshold(&base.with_lambda(lambda), policy).map(|e| e - target);
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let e = energy(hi)?;
        if e.abs() <= tol {
            return Ok(hi);
        }
        if e < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CAP {
            return Err(OnedError::NoTransition { cap: LAMBDA_CAP });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = energy(mid)?;
        if e.abs() <= tol {
            return Ok(mid);
        }
        if e > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Err(OnedError::Stalled {
                lambda: mid,
                defect: e.abs(),
                tol,
            });
        }
    }
    Err(OnedError::Stalled {
        lambda: 0.5 * (lo + hi),
        defect: energy(0.5 * (lo + hi))?.abs(),
        tol,
    })
}

/// Coupling λ at which the full-line threshold E(λ) changes sign.
pub fn critical_coupling(omega: f64, profile: &PotentialProfile, tol: f64) -> Result<f64, OnedError> {
    critical_coupling_with(omega, profile, tol, &ResolutionPolicy::default())
}

pub fn critical_coupling_with(
    omega: f64,
    profile: &PotentialProfile,
    tol: f64,
    policy: &ResolutionPolicy,
) -> Result<f64, OnedError> {
    bisect_coupling(omega, profile, 0.0, tol, policy)
}

/// Coupling λ* with |E(λ*) − target| ≤ tol; a target of ω² gives 0.
pub fn tune_lambda_to_threshold(omega: f64, profile: &PotentialProfile, target: f64, tol: f64) -> Result<f64, OnedError> {
    tune_lambda_with(omega, profile, target, tol, &ResolutionPolicy::default())
}

pub fn tune_lambda_with(
    omega: f64,
    profile: &PotentialProfile,
    target: f64,
    tol: f64,
    policy: &ResolutionPolicy,
) -> Result<f64, OnedError> {
    let omega2 = omega * omega;
    if (target - omega2).abs() <= tol {
        return Ok(0.0);
    }
    if target > omega2 {
        return Err(OnedError::Invalid(format!("target {target} lies above the essential threshold {omega2}")));
    }
    bisect_coupling(omega, profile, target, tol, policy)
}
