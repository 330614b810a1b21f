//! Samples of the fiber ground state h on a composite Gauss–Legendre rule
//! in t = xy, and the transverse defect that the quasi-mode ansatz cancels.

use crate::oned::{h_derivatives, ComparisonDomain, GroundState};
use crate::quad::{composite_nodes, GaussLegendre};
use num_complex::Complex64;

/// Values at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberPoint {
    pub t: f64,
    pub weight: f64,
    pub h: f64,
    pub dh: f64,
    /// h″ from the eigenvalue equation.
    pub ddh: f64,
    /// ω² − λV(t) of the comparison operator.
    pub potential: f64,
}

/// f = −(i√E/2) t² h and its first two derivatives.
pub fn correction_profile(p: &FiberPoint, sqrt_e: f64) -> [Complex64; 3] {
    let c = Complex64::new(0.0, -0.5 * sqrt_e);
    let t = p.t;
    [
        c * (t * t * p.h),
        c * (2.0 * t * p.h + t * t * p.dh),
        c * (2.0 * p.h + 4.0 * t * p.dh + t * t * p.ddh),
    ]
}

/// −f″ + f (E + ω² − λV) − 2i√E s t h′ − i (√E/s) h at one point, with
/// every term formed separately.
pub fn transverse_defect(p: &FiberPoint, energy: f64, s: f64) -> Complex64 {
    let sqrt_e = energy.sqrt();
    let [f, _, ddf] = correction_profile(p, sqrt_e);
    let i = Complex64::i();
    -ddf + f * (energy + p.potential) - i * (2.0 * sqrt_e * s * p.t * p.dh) - i * (sqrt_e / s * p.h)
}

/// Quadrature in t covering the numerical support of h.
#[derive(Debug, Clone)]
pub struct FiberRule {
    points: Vec<FiberPoint>,
    extent: f64,
}

/// Tail length in decay lengths beyond the sampled range; h² drops by e⁻⁸⁰.
const TAIL_DECAY_LENGTHS: f64 = 40.0;

impl FiberRule {
    /// Panels no wider than `panel` with `order` nodes each.
    pub fn new(gs: &GroundState, panel: f64, order: usize) -> Self {
        let (lo, hi) = gs.interpolation_range();
        let (a, b) = match gs.spec().domain() {
            ComparisonDomain::Interval { .. } => (lo, hi),
            _ => {
                let tail = TAIL_DECAY_LENGTHS / gs.decay_rate().max(1e-3);
                (lo - tail, hi + tail)
            }
        };
        let mut breaks = vec![a, lo, hi, b];
        for w in gs.spec().wells() {
            breaks.extend(w.profile.kinks().into_iter().map(|x| x + w.center));
        }
        breaks.retain(|&x| x >= a && x <= b);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut fine = vec![breaks[0]];
        for seg in breaks.windows(2) {
            let pieces = ((seg[1] - seg[0]) / panel).ceil().max(1.0) as usize;
            let step = (seg[1] - seg[0]) / pieces as f64;
            for j in 1..pieces {
                fine.push(seg[0] + j as f64 * step);
            }
            fine.push(seg[1]);
        }
        let rule = GaussLegendre::new(order);
        let points = composite_nodes(&rule, &fine, 1)
            .into_iter()
            .map(|(t, weight)| {
                let (h, dh, ddh) = h_derivatives(gs, t);
                FiberPoint {
                    t,
                    weight,
                    h,
                    dh,
                    ddh,
                    potential: gs.spec().potential(t),
                }
            })
            .collect();
        Self {
            points,
            extent: a.abs().max(b.abs()),
        }
    }

    /// Default resolution: panels of a/8 (capped at 1/4) with 10 nodes.
    pub fn for_ground_state(gs: &GroundState) -> Self {
        let a = gs
            .spec()
            .wells()
            .iter()
            .map(|w| w.profile.half_width())
            .fold(f64::INFINITY, f64::min);
        Self::new(gs, (a / 8.0).min(0.25), 10)
    }

    pub fn points(&self) -> &[FiberPoint] {
        &self.points
    }

    /// Largest |t| covered.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn integrate<F: Fn(&FiberPoint) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }
}
