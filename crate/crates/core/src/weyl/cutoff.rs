//! Cutoffs in the y-direction (χ_k on [1, k]) and in x (the plateau φ).

use crate::interp::QuinticHermite;
use crate::quad::{Adaptive, QuadError};

/// C² cutoff supported in [1, k], normalized so that ∫ z⁻¹ χ² dz = 1.
///
/// Built from a rising piece 8 ln³z / ln³k on [1, √k], a falling piece
/// 2 − 2 ln z / ln k on [√k + 1, k − 1], and quintic Hermite bridges on
/// the two gaps (the second one bringing value and derivatives to zero at k).
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFunction {
    k: f64,
    log_k: f64,
    scale: f64,
    bridge_up: QuinticHermite,
    bridge_down: QuinticHermite,
}

impl CutoffFunction {
    pub fn new(k: f64) -> Result<Self, QuadError> {
        Self::with_prefactor(k, 1.0)
    }

    /// Same cutoff built from `prefactor · χ̃`; the normalization absorbs
    /// the factor.
    pub(crate) fn with_prefactor(k: f64, prefactor: f64) -> Result<Self, QuadError> {
        if !(k >= 16.0 && k.is_finite()) {
            return Err(QuadError::InvalidInterval(1.0, k));
        }
        let log_k = k.ln();
        let root = k.sqrt();
        let rise = |z: f64| rising(z, log_k);
        let fall = |z: f64| falling(z, log_k);
        let bridge_up = QuinticHermite::new(root, root + 1.0, rise(root), fall(root + 1.0));
        let bridge_down = QuinticHermite::new(k - 1.0, k, fall(k - 1.0), [0.0; 3]);
        let mut out = Self {
            k,
            log_k,
            scale: prefactor,
            bridge_up,
            bridge_down,
        };
        let mass = out.log_moment(0, 0)?;
        out.scale = prefactor / mass.sqrt();
        Ok(out)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// The factor c_k multiplying the unnormalized profile.
    pub fn normalization(&self) -> f64 {
        self.scale
    }

    /// Junctions of the piecewise definition, including the support ends.
    pub fn junctions(&self) -> [f64; 5] {
        let root = self.k.sqrt();
        [1.0, root, root + 1.0, self.k - 1.0, self.k]
    }

    /// Unnormalized (value, first, second derivative) at `z`.
    pub fn raw(&self, z: f64) -> [f64; 3] {
        let root = self.k.sqrt();
        if z <= 1.0 || z >= self.k {
            [0.0; 3]
        } else if z <= root {
            rising(z, self.log_k)
        } else if z < root + 1.0 {
            self.bridge_up.eval(z)
        } else if z <= self.k - 1.0 {
            falling(z, self.log_k)
        } else {
            self.bridge_down.eval(z)
        }
    }

    /// (χ, χ′, χ″) at `z`.
    pub fn eval(&self, z: f64) -> [f64; 3] {
        let [v, d, dd] = self.raw(z);
        [self.scale * v, self.scale * d, self.scale * dd]
    }

    /// ∫₁^k z^(2p) (χ^(d))² dz/z, integrated in u = ln z with breaks at the
    /// junctions. Uses the unnormalized profile when called before the
    /// scale is fixed (scale = prefactor).
    pub fn log_moment(&self, power: i32, order: usize) -> Result<f64, QuadError> {
        let breaks: Vec<f64> = self.junctions().iter().map(|z| z.ln()).collect();
        let quad = Adaptive::new(1e-18, 1e-13);
        let f = |u: f64| {
            let z = u.exp();
            let c = self.eval(z)[order];
            z.powi(2 * power) * c * c
        };
        let mut total = 0.0;
        for seg in breaks.windows(2) {
            total += quad.integrate(f, seg[0], seg[1], &[])?;
        }
        Ok(total)
    }

    /// ∫₁^k z⁻¹ χ² dz (equals 1 up to quadrature error).
    pub fn mass(&self) -> Result<f64, QuadError> {
        self.log_moment(0, 0)
    }

    /// J(k) = ∫₁^k z (χ′)² dz.
    pub fn gradient_energy(&self) -> Result<f64, QuadError> {
        self.log_moment(1, 1)
    }

    /// ∫₁^√k z⁻¹ χ̃² dz for the unnormalized profile.
    pub fn rising_mass(&self) -> Result<f64, QuadError> {
        let quad = Adaptive::new(1e-18, 1e-13);
        quad.integrate(
            |u: f64| {
                let v = rising(u.exp(), self.log_k)[0];
                v * v
            },
            0.0,
            0.5 * self.log_k,
            &[],
        )
    }
}

fn rising(z: f64, log_k: f64) -> [f64; 3] {
    let l = z.ln();
    let c = 8.0 / log_k.powi(3);
    [
        c * l.powi(3),
        c * 3.0 * l * l / z,
        c * (6.0 * l - 3.0 * l * l) / (z * z),
    ]
}

fn falling(z: f64, log_k: f64) -> [f64; 3] {
    [2.0 - 2.0 * z.ln() / log_k, -2.0 / (log_k * z), 2.0 / (log_k * z * z)]
}

/// Builds χ_k.
pub fn build_cutoff(k: f64) -> Result<CutoffFunction, QuadError> {
    CutoffFunction::new(k)
}

/// C² plateau in x: 1 on [−c/2, c/2], 0 outside (−c, c), quintic
/// smoothstep shoulders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauCutoff {
    half_width: f64,
}

impl PlateauCutoff {
    pub fn new(half_width: f64) -> Self {
        Self { half_width }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// (φ, φ′, φ″) at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let c = self.half_width;
        let a = x.abs() / c;
        if a <= 0.5 {
            return [1.0, 0.0, 0.0];
        }
        if a >= 1.0 {
            return [0.0; 3];
        }
        let s = 2.0 * (1.0 - a);
        let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let d = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        let dd = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        // ds/dx = −2 sign(x) / c
        let ds = -2.0 * x.signum() / c;
        [v, d * ds, dd * ds * ds]
    }

    /// sup |φ|
    pub fn sup(&self) -> f64 {
        1.0
    }

    /// sup |φ′| = 2 · 15/8 / c
    pub fn slope_bound(&self) -> f64 {
        3.75 / self.half_width
    }

    /// sup |φ″| = 4 · 10/√3 / c²
    pub fn curvature_bound(&self) -> f64 {
        40.0 / (3f64.sqrt() * self.half_width * self.half_width)
    }
}

/// The plateau on (−1, 1).
pub fn build_plateau_cutoff() -> PlateauCutoff {
    PlateauCutoff::new(1.0)
}
