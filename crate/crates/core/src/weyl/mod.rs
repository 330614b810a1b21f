//! Weyl quasi-modes for the supercritical regime.
//!
//! A quasi-mode lives on the strip y ∈ [n, k·n] and has the form
//!
//! ψ(x, y) = e^{iθ(y)} χ_k(y/n) [h(t) + f(t)/y²] (· φ(x) on an interval),
//!
//! with t = (x − b)·y, h the normalized ground state of the comparison
//! operator (eigenvalue E₀ = −E < 0), f(t) = −(i√E/2) t² h(t) and phase
//! θ′(y) = √(E y² + μ). All integrals are taken in (t, u) with y = n·eᵘ, where
//! dx dy = dt du. The phase is unimodular and is factored out of every
//! pointwise expression, so θ itself is never evaluated.

mod cutoff;
mod fiber;

pub use cutoff::{build_cutoff, build_plateau_cutoff, CutoffFunction, PlateauCutoff};
pub use fiber::{correction_profile, transverse_defect, FiberPoint, FiberRule};

use crate::model::{ModelConfig, XDomain};
use crate::oned::{h_derivatives, GroundState, OnedError};
use crate::quad::{composite_nodes, GaussLegendre, QuadError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeylError {
    #[error("comparison threshold E0 = {0} is not negative; no quasi-modes exist")]
    NotSupercritical(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("epsilon ladder must be strictly decreasing")]
    UnsortedLadder,
    #[error("unsuitable ground state: {0}")]
    GroundState(String),
    #[error("no channel in the configuration matches the ground state's well (lambda {lambda})")]
    NoMatchingChannel { lambda: f64 },
    #[error("parameter search reached its cap ({cap}) with {limiting} still at {value:e}")]
    Cap { cap: String, limiting: &'static str, value: f64 },
    #[error("quadrature budget exhausted for {what}: relative change {change:e} at {panels} panels")]
    Quadrature { what: &'static str, change: f64, panels: usize },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Oned(#[from] OnedError),
}

/// θ′(y) = √(E y² + μ), θ″(y) = E y / θ′(y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRule {
    pub mu: f64,
    pub energy: f64,
}

impl PhaseRule {
    pub fn new(mu: f64, energy: f64) -> Self {
        Self { mu, energy }
    }

    /// Smallest y with a real phase derivative.
    pub fn turning_point(&self) -> f64 {
        if self.mu < 0.0 {
            (-self.mu / self.energy).sqrt()
        } else {
            0.0
        }
    }

    pub fn first(&self, y: f64) -> f64 {
        (self.energy * y * y + self.mu).sqrt()
    }

    pub fn second(&self, y: f64) -> f64 {
        self.energy * y / self.first(y)
    }

    /// θ′ / (√E y) = √(1 + μ/(E y²)).
    pub fn stretch(&self, y: f64) -> f64 {
        (1.0 + self.mu / (self.energy * y * y)).sqrt()
    }
}

/// Where the quasi-mode sits in the configuration.
#[derive(Debug, Clone, PartialEq)]
struct Placement {
    channel: usize,
    center: f64,
    omega: f64,
    plateau: Option<PlateauCutoff>,
}

fn place(config: &ModelConfig, gs: &GroundState) -> Result<Placement, WeylError> {
    let wells = gs.spec().wells();
    if wells.len() != 1 || wells[0].center != 0.0 {
        return Err(WeylError::GroundState("expected a single well centered at the origin".into()));
    }
    let well = &wells[0];
    if (gs.omega() - config.omega()).abs() > 1e-14 * config.omega() {
        return Err(WeylError::GroundState(format!(
            "omega {} differs from the configuration's {}",
            gs.omega(),
            config.omega()
        )));
    }
    let channel = config
        .channels()
        .iter()
        .position(|c| c.lambda == well.lambda && c.profile == well.profile)
        .ok_or(WeylError::NoMatchingChannel { lambda: well.lambda })?;
    let center = config.channels()[channel].center;
    let plateau = match config.x_domain() {
        XDomain::FullLine => None,
        XDomain::Interval { half_width, .. } => {
            if center.abs() >= 0.5 * half_width {
                return Err(WeylError::GroundState(format!(
                    "channel center {center} lies outside the plateau |x| <= {}",
                    0.5 * half_width
                )));
            }
            Some(PlateauCutoff::new(half_width))
        }
    };
    Ok(Placement {
        channel,
        center,
        omega: config.omega(),
        plateau,
    })
}

/// Squared L² norms of the t-profiles that enter the term bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FiberMoments {
    h: f64,
    t_dh: f64,
    t2_ddh: f64,
    f: f64,
    /// t f′ − 2f
    f_mix: f64,
    /// t² f″ − 4t f′ + 6f
    f_curv: f64,
}

fn fiber_moments(rule: &FiberRule, sqrt_e: f64) -> FiberMoments {
    let sq = |g: &dyn Fn(&FiberPoint) -> Complex64| rule.integrate(|p| g(p).norm_sqr());
    FiberMoments {
        h: rule.integrate(|p| p.h * p.h),
        t_dh: rule.integrate(|p| (p.t * p.dh).powi(2)),
        t2_ddh: rule.integrate(|p| (p.t * p.t * p.ddh).powi(2)),
        f: sq(&|p| correction_profile(p, sqrt_e)[0]),
        f_mix: sq(&|p| {
            let [f, df, _] = correction_profile(p, sqrt_e);
            df * p.t - f * 2.0
        }),
        f_curv: sq(&|p| {
            let [f, df, ddf] = correction_profile(p, sqrt_e);
            ddf * (p.t * p.t) - df * (4.0 * p.t) + f * 6.0
        }),
    }
}

/// Tail masses ∫_{|t| > τ} of h′², |f′|², h², |f|².
fn tail_moments(rule: &FiberRule, sqrt_e: f64, tau: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for p in rule.points().iter().filter(|p| p.t.abs() > tau) {
        let [f, df, _] = correction_profile(p, sqrt_e);
        out[0] += p.weight * p.dh * p.dh;
        out[1] += p.weight * df.norm_sqr();
        out[2] += p.weight * p.h * p.h;
        out[3] += p.weight * f.norm_sqr();
    }
    out
}

/// Scale parameters of one quasi-mode and the bounds that justified them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylParameters {
    pub epsilon: f64,
    /// k = 2^k_exponent
    pub k_exponent: u32,
    pub k: f64,
    /// Power of two; stored as a float because it routinely exceeds u64.
    pub n: f64,
    /// J(k) = ∫ z (χ_k′)² dz
    pub gradient_energy: f64,
    /// Bound on the squared norm of the f/y² part (must stay below 1/16).
    pub correction_bound: f64,
    /// Named bounds on squared norms of the n-suppressed residual terms.
    pub term_bounds: Vec<(&'static str, f64)>,
}

impl WeylParameters {
    pub fn term_bound_sum(&self) -> f64 {
        self.term_bounds.iter().map(|t| t.1).sum()
    }

    /// Support [n, k·n] of y ↦ χ_k(y/n).
    pub fn support(&self) -> (f64, f64) {
        (self.n, self.k * self.n)
    }
}

/// Cap on k and on k·n.
const LOG2_CAP: u32 = 200;
/// Ladder of k = 2^m starts at m = 4.
const FIRST_EXPONENT: u32 = 4;

/// (k, n) for a full-line quasi-mode with no predecessor.
pub fn choose_parameters(epsilon: f64, gs: &GroundState, mu: f64) -> Result<WeylParameters, WeylError> {
    let rule = FiberRule::for_ground_state(gs);
    choose_with(epsilon, gs, &rule, mu, None, None, None)
}

/// Smallest k = 2^m (m ≥ 4) with E·J(k) < ε, then n = 4k doubled until it
/// clears the predecessor's support, the correction bound is below 1/16 and
/// the n-suppressed term bounds sum below ε.
fn choose_with(
    epsilon: f64,
    gs: &GroundState,
    rule: &FiberRule,
    mu: f64,
    plateau: Option<(PlateauCutoff, f64)>,
    previous: Option<&WeylParameters>,
    y_floor: Option<f64>,
) -> Result<WeylParameters, WeylError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(WeylError::InvalidEpsilon(epsilon));
    }
    let e0 = gs.threshold();
    if !(e0 < 0.0) {
        return Err(WeylError::NotSupercritical(e0));
    }
    let energy = -e0;
    let sqrt_e = energy.sqrt();
    let mut exponent = FIRST_EXPONENT;
    let (cutoff, gradient) = loop {
        let k = 2f64.powi(exponent as i32);
        let cutoff = CutoffFunction::new(k)?;
        let j = cutoff.gradient_energy()?;
        if energy * j < epsilon {
            break (cutoff, j);
        }
        if exponent >= LOG2_CAP {
            return Err(WeylError::Cap {
                cap: format!("k <= 2^{LOG2_CAP}"),
                limiting: "E*J(k)",
                value: energy * j,
            });
        }
        exponent += 1;
    };
    let k = cutoff.k();
    let moments = fiber_moments(rule, sqrt_e);
    let mz = |q: i32, d: usize| cutoff.log_moment(-q, d);
    let mass_y4 = mz(2, 0)?;
    let (mass_z0, mass_y8) = (mz(0, 0)?, mz(4, 0)?);
    let (grad_z2, grad_z6) = (mz(1, 1)?, mz(3, 1)?);
    let (curv_z0, curv_z4) = (mz(0, 2)?, mz(2, 2)?);
    let (mass_zm2, mass_z2) = (mz(-1, 0)?, mz(1, 0)?);

    let mut n = 4.0 * k;
    if let Some(p) = previous {
        while n <= p.k * p.n {
            n *= 2.0;
        }
    }
    let phase = PhaseRule::new(mu, energy);
    let floor = y_floor.unwrap_or(0.0).max(2.0 * phase.turning_point());
    while n < floor {
        n *= 2.0;
    }
    loop {
        if n * k > 2f64.powi(LOG2_CAP as i32) {
            return Err(WeylError::Cap {
                cap: format!("k*n <= 2^{LOG2_CAP}"),
                limiting: "n-suppressed terms",
                value: n,
            });
        }
        let m = mu / (energy * n * n);
        let edge = (1.0 + m).sqrt();
        let (s_min, s_max) = (edge.min(1.0), edge.max(1.0));
        let n2 = n * n;
        let n4 = n2 * n2;
        let n8 = n4 * n4;
        let stretch = mu.abs() / (energy * (1.0 + s_min));
        let mut terms = vec![
            ("phase stretch t h'", (2.0 * sqrt_e * stretch).powi(2) / n4 * mass_y4 * moments.t_dh),
            ("phase stretch h", (sqrt_e * stretch / s_min).powi(2) / n4 * mass_y4 * moments.h),
            ("f' drift", (2.0 * sqrt_e * s_max).powi(2) / n4 * mass_y4 * moments.f_mix),
            ("f phase", (sqrt_e / s_min).powi(2) / n4 * mass_y4 * moments.f),
            ("t^2 h''", mass_y4 / n4 * moments.t2_ddh),
            ("f curvature", mass_y8 / n8 * moments.f_curv),
            ("chi' f phase", (2.0 * sqrt_e * s_max).powi(2) / n4 * grad_z2 * moments.f),
            ("chi' t h'", 4.0 / n4 * grad_z2 * moments.t_dh),
            ("chi' f'", 4.0 / n8 * grad_z6 * moments.f_mix),
            ("chi'' h", curv_z0 / n4 * moments.h),
            ("chi'' f", curv_z4 / n8 * moments.f),
        ];
        let mut sup_phi = 1.0;
        if let Some((phi, center)) = plateau {
            sup_phi = phi.sup();
            let tau = (0.5 * phi.half_width() - center.abs()) * n;
            let [dh, df, h, f] = tail_moments(rule, sqrt_e, tau);
            let (d1, d2) = (phi.slope_bound().powi(2), phi.curvature_bound().powi(2));
            terms.push(("phi' h'", 4.0 * d1 * n2 * mass_zm2 * dh));
            terms.push(("phi' f'", 4.0 * d1 / n2 * mass_z2 * df));
            terms.push(("phi'' h", d2 * mass_z0 * h));
            terms.push(("phi'' f", d2 / n4 * mass_y4 * f));
        }
        let correction = sup_phi * sup_phi * mass_y4 / n4 * moments.f;
        let params = WeylParameters {
            epsilon,
            k_exponent: exponent,
            k,
            n,
            gradient_energy: gradient,
            correction_bound: correction,
            term_bounds: terms,
        };
        if correction < 1.0 / 16.0 && params.term_bound_sum() < epsilon {
            return Ok(params);
        }
        n *= 2.0;
    }
}

/// One quasi-mode, ready for evaluation.
#[derive(Debug, Clone)]
pub struct QuasiMode {
    params: WeylParameters,
    cutoff: CutoffFunction,
    phase: PhaseRule,
    /// E₀ of the ground state; the energy E is −E₀.
    e0: f64,
    placement: Placement,
    fiber: Arc<FiberRule>,
}

/// Integral of a quasi-mode quantity split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// ∬ |h χ φ|²
    pub main: f64,
    /// ∬ |f χ φ / y²|²
    pub correction: f64,
    /// ‖ψ‖
    pub norm: f64,
}

/// Values of the y-dependent factors at one u-node.
#[derive(Debug, Clone, Copy)]
struct Slice {
    y: f64,
    r2: f64,
    z: f64,
    chi: [f64; 3],
    s: f64,
    weight: f64,
}

const U_ORDER: usize = 16;
const U_PANELS_START: usize = 4;
const U_PANELS_MAX: usize = 256;
const U_REL_TOL: f64 = 1e-9;

impl QuasiMode {
    /// Quasi-mode for `config` built on `gs` with scales from `params`.
    pub fn new(config: &ModelConfig, gs: &GroundState, mu: f64, params: WeylParameters) -> Result<Self, WeylError> {
        let fiber = Arc::new(FiberRule::for_ground_state(gs));
        Self::with_fiber(config, gs, mu, params, fiber)
    }

    fn with_fiber(
        config: &ModelConfig,
        gs: &GroundState,
        mu: f64,
        params: WeylParameters,
        fiber: Arc<FiberRule>,
    ) -> Result<Self, WeylError> {
        let e0 = gs.threshold();
        if !(e0 < 0.0) {
            return Err(WeylError::NotSupercritical(e0));
        }
        let placement = place(config, gs)?;
        let cutoff = CutoffFunction::new(params.k)?;
        Ok(Self {
            params,
            cutoff,
            phase: PhaseRule::new(mu, -e0),
            e0,
            placement,
            fiber,
        })
    }

    pub fn parameters(&self) -> &WeylParameters {
        &self.params
    }

    pub fn mu(&self) -> f64 {
        self.phase.mu
    }

    pub fn energy(&self) -> f64 {
        self.phase.energy
    }

    pub fn cutoff(&self) -> &CutoffFunction {
        &self.cutoff
    }

    pub fn plateau(&self) -> Option<PlateauCutoff> {
        self.placement.plateau
    }

    pub fn fiber(&self) -> &FiberRule {
        &self.fiber
    }

    fn slice(&self, u: f64, weight: f64) -> Slice {
        let z = u.exp();
        let y = self.params.n * z;
        Slice {
            y,
            r2: 1.0 / (y * y),
            z,
            chi: self.cutoff.eval(z),
            s: self.phase.stretch(y),
            weight,
        }
    }

    fn u_nodes(&self, panels: usize) -> Vec<(f64, f64)> {
        let breaks: Vec<f64> = self.cutoff.junctions().iter().map(|z| z.ln()).collect();
        composite_nodes(&GaussLegendre::new(U_ORDER), &breaks, panels)
    }

    /// (φ, φ′, φ″) at the x belonging to (t, y); ones in full-line mode.
    fn plateau_at(&self, t: f64, y: f64) -> [f64; 3] {
        match self.placement.plateau {
            Some(phi) => phi.eval(self.placement.center + t / y),
            None => [1.0, 0.0, 0.0],
        }
    }

    /// ψ e^{−iθ} at (t, y).
    fn value_at(&self, p: &FiberPoint, sl: &Slice) -> Complex64 {
        let f = correction_profile(p, self.phase.energy.sqrt())[0];
        (f * sl.r2 + p.h) * (sl.chi[0] * self.plateau_at(p.t, sl.y)[0])
    }

    /// Σ over the other channels of −λ_j V_j evaluated along the fiber, with
    /// the anchored channel's own term added back wherever the y-cutoff
    /// switches it off.
    fn foreign_potential(&self, config: &ModelConfig, t: f64, y: f64) -> f64 {
        let own = self.placement.channel;
        let active = config.y_cutoff().map_or(true, |y0| y.abs() >= y0);
        let mut q = 0.0;
        for (j, ch) in config.channels().iter().enumerate() {
            if j == own {
                if !active {
                    q += ch.lambda * ch.profile.value(t);
                }
                continue;
            }
            if active && ch.lambda != 0.0 {
                q -= ch.lambda * ch.profile.value(t + (self.placement.center - ch.center) * y);
            }
        }
        q
    }

    /// (H − μ)ψ e^{−iθ} at (t, y), assembled term by term.
    fn residual_at(&self, config: &ModelConfig, p: &FiberPoint, sl: &Slice) -> Complex64 {
        let energy = self.phase.energy;
        let sqrt_e = energy.sqrt();
        let i = Complex64::i();
        let (y, r2, s, t) = (sl.y, sl.r2, sl.s, p.t);
        let n = self.params.n;
        let [chi, dchi, ddchi] = sl.chi;
        let [f, df, ddf] = correction_profile(p, sqrt_e);
        let u = f * r2 + p.h;
        // y·∂_y of h + f/y²
        let u_y = (df * t - f * 2.0) * r2 + t * p.dh;

        let mut acc = Complex64::new(0.0, 0.0);
        // y²(−h″ + (ω² − λV + E)h) reduced through the eigenvalue equation
        acc += y * y * (energy + self.e0) * p.h * chi;
        acc += transverse_defect(p, energy, s) * chi;
        acc += (-(t * t * p.ddh) - i * (2.0 * sqrt_e * s) * (df * t - f * 2.0) - i * (sqrt_e / s) * f) * (r2 * chi);
        acc -= (ddf * (t * t) - df * (4.0 * t) + f * 6.0) * (r2 * r2 * chi);
        acc += (-i * (2.0 * sqrt_e * s * sl.z) * u - u_y * (2.0 / (n * y))) * dchi;
        acc -= u * (ddchi / (n * n));
        let foreign = self.foreign_potential(config, t, y);
        if foreign != 0.0 {
            acc += u * (y * y * foreign * chi);
        }
        match self.placement.plateau {
            None => acc,
            Some(_) => {
                let [phi, dphi, ddphi] = self.plateau_at(t, y);
                let u_x = df * (1.0 / y) + y * p.dh;
                acc * phi - (u_x * (2.0 * dphi) + u * ddphi) * chi
            }
        }
    }

    /// Σ over the tensor rule of `density`, refining the u-panels until two
    /// successive results agree.
    fn integrate<F>(&self, what: &'static str, density: F) -> Result<f64, WeylError>
    where
        F: Fn(&FiberPoint, &Slice) -> f64 + Sync,
    {
        // Collected before summing so the result does not depend on the
        // thread count.
        let sum = |panels: usize| -> f64 {
            let parts: Vec<f64> = self
                .u_nodes(panels)
                .par_iter()
                .map(|&(u, w)| {
                    let sl = self.slice(u, w);
                    sl.weight * self.fiber.points().iter().map(|p| p.weight * density(p, &sl)).sum::<f64>()
                })
                .collect();
            parts.iter().sum()
        };
        let mut panels = U_PANELS_START;
        let mut prev = sum(panels);
        loop {
            panels *= 2;
            let next = sum(panels);
            let change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
            if change <= U_REL_TOL || (next - prev).abs() < 1e-300 {
                return Ok(next);
            }
            if panels >= U_PANELS_MAX {
                return Err(WeylError::Quadrature { what, change, panels });
            }
            prev = next;
        }
    }

    /// ‖(H − μ)ψ‖ with the unimodular `phase` multiplied into every
    /// pointwise value (the norm must not depend on it).
    pub fn residual_norm_with_phase(&self, config: &ModelConfig, phase: Complex64) -> Result<f64, WeylError> {
        Ok(self
            .integrate("residual", |p, sl| (phase * self.residual_at(config, p, sl)).norm_sqr())?
            .sqrt())
    }
}

/// ‖ψ‖ together with its main and correction parts.
pub fn quasimode_norm(qm: &QuasiMode) -> Result<NormReport, WeylError> {
    let sqrt_e = qm.energy().sqrt();
    let main = qm.integrate("main norm", |p, sl| {
        let v = p.h * sl.chi[0] * qm.plateau_at(p.t, sl.y)[0];
        v * v
    })?;
    let correction = qm.integrate("correction norm", |p, sl| {
        let f = correction_profile(p, sqrt_e)[0];
        (f * (sl.r2 * sl.chi[0] * qm.plateau_at(p.t, sl.y)[0])).norm_sqr()
    })?;
    let total = qm.integrate("norm", |p, sl| qm.value_at(p, sl).norm_sqr())?;
    Ok(NormReport {
        main,
        correction,
        norm: total.sqrt(),
    })
}

/// ‖(H − μ)ψ‖ for the operator defined by `config`.
pub fn residual_norm(qm: &QuasiMode, config: &ModelConfig) -> Result<f64, WeylError> {
    qm.residual_norm_with_phase(config, Complex64::new(1.0, 0.0))
}

/// max over `ts` of |−f″ + f(E + ω² − λV) − 2i√E t h′ − i√E h| with
/// f = −(i√E/2) t² h and h″ from the eigenvalue equation.
pub fn residual_identity_check(gs: &GroundState, energy: f64, ts: &[f64]) -> f64 {
    ts.iter()
        .map(|&t| {
            let (h, dh, ddh) = h_derivatives(gs, t);
            let p = FiberPoint {
                t,
                weight: 0.0,
                h,
                dh,
                ddh,
                potential: gs.spec().potential(t),
            };
            transverse_defect(&p, energy, 1.0).norm()
        })
        .fold(0.0, f64::max)
}

/// Relative slack applied to the quadrature-evaluated inequalities.
pub const CERTIFICATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub params: WeylParameters,
    pub norm: NormReport,
    pub residual: f64,
    pub normalized_residual: f64,
    /// 9ε (times ‖φ‖²∞ on an interval)
    pub bound_9eps: f64,
    pub norm_ok: bool,
    pub correction_ok: bool,
    pub residual_ok: bool,
    pub normalized_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylCertificate {
    pub mu: f64,
    pub energy: f64,
    pub interval: bool,
    pub rows: Vec<CertificateRow>,
    /// Normalized residual strictly decreasing along the ladder.
    pub decreasing: bool,
    /// Supports [n, k·n] pairwise disjoint.
    pub disjoint: bool,
}

impl WeylCertificate {
    pub fn passed(&self) -> bool {
        self.decreasing
            && self.disjoint
            && self
                .rows
                .iter()
                .all(|r| r.norm_ok && r.correction_ok && r.residual_ok && r.normalized_ok)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "epsilon,k,n_k,norm,residual,normalized_residual,bound_9eps,norm_check,correction_check,residual_check,normalized_check\n",
        );
        let mark = |ok: bool| if ok { "pass" } else { "fail" };
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:.12e},{:.12e},{:.12e},{},{},{},{},{}\n",
                r.params.epsilon,
                r.params.k,
                r.params.n,
                r.norm.norm,
                r.residual,
                r.normalized_residual,
                r.bound_9eps,
                mark(r.norm_ok),
                mark(r.correction_ok),
                mark(r.residual_ok),
                mark(r.normalized_ok),
            ));
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "epsilon": r.params.epsilon,
                    "k": r.params.k,
                    "n_k": r.params.n,
                    "norm": r.norm.norm,
                    "main": r.norm.main,
                    "correction": r.norm.correction,
                    "residual": r.residual,
                    "normalized_residual": r.normalized_residual,
                    "bound_9eps": r.bound_9eps,
                    "checks": {
                        "norm": r.norm_ok,
                        "correction": r.correction_ok,
                        "residual": r.residual_ok,
                        "normalized_residual": r.normalized_ok,
                    },
                })
            })
            .collect();
        json!({
            "mu": self.mu,
            "energy": self.energy,
            "interval": self.interval,
            "rows": rows,
            "checks": { "decreasing": self.decreasing, "disjoint": self.disjoint },
            "passed": self.passed(),
        })
    }
}

/// Quasi-modes for a decreasing ε ladder, each supported beyond the
/// previous one, with every inequality of the construction checked.
pub fn weyl_certificate(
    config: &ModelConfig,
    gs: &GroundState,
    mu: f64,
    ladder: &[f64],
) -> Result<WeylCertificate, WeylError> {
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(WeylError::UnsortedLadder);
    }
    let e0 = gs.threshold();
    if !(e0 < 0.0) {
        return Err(WeylError::NotSupercritical(e0));
    }
    let placement = place(config, gs)?;
    let fiber = Arc::new(FiberRule::for_ground_state(gs));
    let plateau = placement.plateau.map(|p| (p, placement.center));
    let mut rows: Vec<CertificateRow> = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let params = choose_with(eps, gs, &fiber, mu, plateau, rows.last().map(|r| &r.params), config.y_cutoff())?;
        let qm = QuasiMode::with_fiber(config, gs, mu, params.clone(), Arc::clone(&fiber))?;
        let norm = quasimode_norm(&qm)?;
        let residual = residual_norm(&qm, config)?;
        let sup_phi = qm.plateau().map_or(1.0, |p| p.sup());
        let bound = 9.0 * eps * sup_phi * sup_phi;
        let norm_floor = if qm.plateau().is_some() { 0.5 - 2.0 * eps.sqrt() } else { 0.5 };
        let normalized = residual / norm.norm;
        rows.push(CertificateRow {
            norm_ok: norm.norm >= norm_floor,
            correction_ok: norm.correction < 1.0 / 16.0,
            residual_ok: residual * residual <= bound * (1.0 + CERTIFICATE_TOL),
            normalized_ok: normalized <= 2.0 * bound.sqrt() * (1.0 + CERTIFICATE_TOL),
            params,
            norm,
            residual,
            normalized_residual: normalized,
            bound_9eps: bound,
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].normalized_residual < w[0].normalized_residual);
    let disjoint = rows.iter().enumerate().all(|(i, a)| {
        rows[i + 1..].iter().all(|b| {
            let (a0, a1) = a.params.support();
            let (b0, b1) = b.params.support();
            a1 < b0 || b1 < a0
        })
    });
    Ok(WeylCertificate {
        mu,
        energy: -e0,
        interval: placement.plateau.is_some(),
        rows,
        decreasing,
        disjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryCondition, ChannelSpec, PotentialProfile};
    use crate::oned::{resolved_ground_state, ComparisonSpec, ResolutionPolicy};

    fn setup(lambda: f64) -> (ModelConfig, GroundState) {
        let p = PotentialProfile::cosine(1.0, 1.0).unwrap();
        let gs = resolved_ground_state(
            &ComparisonSpec::full_line(1.0, lambda, p.clone()).unwrap(),
            &ResolutionPolicy::default(),
        )
        .unwrap();
        (ModelConfig::single_channel(1.0, lambda, p).unwrap(), gs)
    }

    fn small_mode(config: &ModelConfig, gs: &GroundState, mu: f64, k: f64, n: f64) -> QuasiMode {
        let params = WeylParameters {
            epsilon: 0.5,
            k_exponent: k.log2() as u32,
            k,
            n,
            gradient_energy: 0.0,
            correction_bound: 0.0,
            term_bounds: vec![],
        };
        QuasiMode::new(config, gs, mu, params).unwrap()
    }

    #[test]
    fn phase_rule_derivatives() {
        let rule = PhaseRule::new(-2.0, 0.5);
        assert_eq!(rule.turning_point(), 2.0);
        let y = 5.0;
        let d = 1e-5;
        let num = (rule.first(y + d) - rule.first(y - d)) / (2.0 * d);
        assert!((num - rule.second(y)).abs() < 1e-8);
        assert!((rule.stretch(y) * 0.5f64.sqrt() * y - rule.first(y)).abs() < 1e-12);
    }

    #[test]
    fn choose_is_monotone_in_epsilon() {
        let (_, gs) = setup(4.585885544);
        let a = choose_parameters(0.3, &gs, 0.0).unwrap();
        let b = choose_parameters(0.2, &gs, 0.0).unwrap();
        assert!(b.k >= a.k);
        assert!(a.correction_bound < 1.0 / 16.0 && a.term_bound_sum() < 0.3);
        assert!(a.n >= 4.0 * a.k);
    }

    #[test]
    fn norm_splits_into_main_and_correction() {
        let (cfg, gs) = setup(4.585885544);
        let qm = small_mode(&cfg, &gs, 0.0, 16.0, 8.0);
        let r = quasimode_norm(&qm).unwrap();
        assert!((r.main - 1.0).abs() < 1e-6, "{}", r.main);
        assert!((r.norm * r.norm - r.main - r.correction).abs() < 1e-10);
        // exact: n⁻⁴ ∫ z⁻⁴ χ² du ∫ |f|²
        let sqrt_e = qm.energy().sqrt();
        let f2 = qm.fiber().integrate(|p| correction_profile(p, sqrt_e)[0].norm_sqr());
        let exact = qm.cutoff().log_moment(-2, 0).unwrap() / 8f64.powi(4) * f2;
        assert!((r.correction - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn change_of_variables_matches_direct_quadrature() {
        let (cfg, gs) = setup(4.585885544);
        let (k, n) = (16.0, 4.0);
        let qm = small_mode(&cfg, &gs, 0.0, k, n);
        let main = quasimode_norm(&qm).unwrap().main;
        // direct ∬ h(xy)² χ(y/n)² dx dy
        let c = qm.cutoff().clone();
        let rule = GaussLegendre::new(20);
        let ybreaks: Vec<f64> = c.junctions().iter().map(|z| n * z).collect();
        let ynodes = composite_nodes(&rule, &ybreaks, 16);
        let extent = qm.fiber().extent();
        let mut direct = 0.0;
        for (y, wy) in ynodes {
            let chi = c.eval(y / n)[0];
            let xs: Vec<f64> = (0..=800).map(|i| -extent / y + 2.0 * extent / y * i as f64 / 800.0).collect();
            let inner: f64 = composite_nodes(&GaussLegendre::new(8), &xs, 1)
                .into_iter()
                .map(|(x, wx)| wx * gs.value_and_slope(x * y).0.powi(2))
                .sum();
            direct += wy * chi * chi * inner;
        }
        assert!((direct - main).abs() < 1e-6, "{direct} vs {main}");
    }

    #[test]
    fn residual_ignores_global_phase() {
        let (cfg, gs) = setup(4.585885544);
        let qm = small_mode(&cfg, &gs, 1.5, 256.0, 1024.0);
        let a = residual_norm(&qm, &cfg).unwrap();
        let b = qm.residual_norm_with_phase(&cfg, Complex64::from_polar(1.0, 0.7)).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn residual_is_dominated_by_cutoff_gradient() {
        // ‖R‖² → 4E·J(k) as n grows
        let (cfg, gs) = setup(4.585885544);
        let qm = small_mode(&cfg, &gs, 0.0, 2f64.powi(12), 2f64.powi(14));
        let r = residual_norm(&qm, &cfg).unwrap();
        let target = 4.0 * qm.energy() * qm.cutoff().gradient_energy().unwrap();
        assert!((r * r - target).abs() < 1e-3 * target, "{} vs {target}", r * r);
    }

    #[test]
    fn identity_defect_vanishes_for_matched_energy() {
        let (_, gs) = setup(4.585885544);
        let ts: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        assert!(residual_identity_check(&gs, -gs.threshold(), &ts) < 1e-12);
        // pure tail region
        let tail: Vec<f64> = (0..50).map(|i| 12.0 + 0.5 * i as f64).collect();
        assert!(residual_identity_check(&gs, -gs.threshold(), &tail) < 1e-10);
    }

    #[test]
    fn translated_channel_gives_same_residual() {
        let (cfg, gs) = setup(4.585885544);
        let p = PotentialProfile::cosine(1.0, 1.0).unwrap();
        let moved = ModelConfig::new(
            1.0,
            vec![ChannelSpec::new(4.585885544, 3.0, p).unwrap()],
            XDomain::FullLine,
        )
        .unwrap();
        let a = residual_norm(&small_mode(&cfg, &gs, 0.0, 256.0, 1024.0), &cfg).unwrap();
        let b = residual_norm(&small_mode(&moved, &gs, 0.0, 256.0, 1024.0), &moved).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn interval_mode_needs_center_inside_plateau() {
        let (_, gs) = setup(4.585885544);
        let p = PotentialProfile::cosine(1.0, 1.0).unwrap();
        let cfg = ModelConfig::new(
            1.0,
            vec![ChannelSpec::new(4.585885544, 2.5, p).unwrap()],
            XDomain::Interval {
                half_width: 4.0,
                bc: BoundaryCondition::Dirichlet,
            },
        )
        .unwrap();
        assert!(matches!(
            weyl_certificate(&cfg, &gs, 0.0, &[0.1]),
            Err(WeylError::GroundState(_))
        ));
    }

    #[test]
    fn subcritical_ground_state_is_rejected() {
        let (cfg, gs) = setup(1.0);
        assert!(matches!(
            weyl_certificate(&cfg, &gs, 0.0, &[0.1]),
            Err(WeylError::NotSupercritical(_))
        ));
    }
}
