//! Subcritical lower bounds by Neumann bracketing in y, and the
//! multi-channel classification by the smallest comparison threshold.
//!
//! Horizontal strips `ln n < |y| ≤ ln(n+1)` with Neumann conditions bound
//! H from below. On strip n ≥ 2 the operator is compared with the
//! separated one `−Δ + ω² ln²n − λ ln²n V(x ln n)`, whose bottom is
//! `ln²n · E_L`. With Δₙ = ln(n+1) − ln n, the two estimates
//!
//! ```text
//! |y² − ln²n| ≤ 2 ln(n+1) Δₙ,   |V(xy) − V(x ln n)| ≤ sup|V′| |x| Δₙ,
//! ```
//!
//! on the channel support |x| ≤ a / ln n give the explicit correction
//!
//! ```text
//! c(n) = λ Δₙ (2 ln(n+1) sup V + a ln n sup|V′|)  ~  λ (2 sup V + a sup|V′|) ln n / n.
//! ```
//!
//! Strip 1 is the central region |y| ≤ ln 2, bounded by −λ sup V ln²2.
//! Strips with y < 0 are the mirror images of those with y > 0; reflecting
//! x about the channel center maps one comparison operator onto the other,
//! so both signs share the same bound.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{BoundaryCondition, ChannelSpec, ModelConfig, XDomain};
use crate::oned::{threshold, ComparisonDomain, ComparisonSpec, OnedError, ResolutionPolicy, Well};

/// Default half-width of the critical band around t_V = 0.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-6;

/// Largest strip index examined before giving up on the tail.
const MAX_STRIPS: u64 = 1 << 26;

#[derive(Debug, Error)]
pub enum BracketingError {
    #[error(transparent)]
    Oned(#[from] OnedError),
    #[error("the configuration has no channels")]
    NoChannels,
    #[error("strip bounds need at most one channel with nonzero coupling, found {0}")]
    MultipleChannels(usize),
    #[error("strip bounds are available on the full line or a Dirichlet interval, not {0:?} ends")]
    UnsupportedBoundary(BoundaryCondition),
    #[error("comparison threshold {0} is negative; the operator is unbounded below")]
    Supercritical(f64),
    #[error("tail bound still below the strip minimum at n = {0}")]
    TailNotMonotone(u64),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl BracketingError {
    /// Whether the error stems from the configuration rather than the
    /// computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Self::NoChannels | Self::MultipleChannels(_) | Self::UnsupportedBoundary(_) | Self::Invalid(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Subcritical,
    Supercritical,
    Critical { tol: f64 },
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Subcritical => "subcritical",
            Self::Supercritical => "supercritical",
            Self::Critical { .. } => "critical",
        }
    }
}

/// inf σ(L_j) for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelThreshold {
    pub index: usize,
    pub lambda: f64,
    pub center: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    #[serde(rename = "t_V")]
    pub t_v: f64,
    pub verdict: Verdict,
    pub per_channel: Vec<ChannelThreshold>,
}

/// The comparison operator of one channel: the full line, or the config's
/// interval with its boundary condition and the channel at its own center.
pub fn channel_comparison(config: &ModelConfig, channel: &ChannelSpec) -> Result<ComparisonSpec, OnedError> {
    let well = Well {
        lambda: channel.lambda,
        center: channel.center,
        profile: channel.profile.clone(),
    };
    match config.x_domain() {
        XDomain::FullLine => {
            let centered = Well { center: 0.0, ..well };
            ComparisonSpec::with_wells(config.omega(), vec![centered], ComparisonDomain::FullLine)
        }
        XDomain::Interval { half_width, bc } => {
            ComparisonSpec::with_wells(config.omega(), vec![well], ComparisonDomain::Interval { half_width, bc })
        }
    }
}

/// Per-channel thresholds, t_V = min_j inf σ(L_j) and the sign verdict.
pub fn classify(config: &ModelConfig, tol: f64) -> Result<Classification, BracketingError> {
    classify_with(config, tol, &ResolutionPolicy::default())
}

pub fn classify_with(config: &ModelConfig, tol: f64, policy: &ResolutionPolicy) -> Result<Classification, BracketingError> {
    if !(tol > 0.0) {
        return Err(BracketingError::Invalid(format!("tol must be > 0, got {tol}")));
    }
    if config.channels().is_empty() {
        return Err(BracketingError::NoChannels);
    }
    let per_channel = config
        .channels()
        .par_iter()
        .enumerate()
        .map(|(index, ch)| {
            let e = threshold(&channel_comparison(config, ch)?, policy)?;
            Ok(ChannelThreshold {
                index,
                lambda: ch.lambda,
                center: ch.center,
                threshold: e,
            })
        })
        .collect::<Result<Vec<_>, OnedError>>()?;
    let t_v = per_channel.iter().map(|c| c.threshold).fold(f64::INFINITY, f64::min);
    let verdict = if t_v > tol {
        Verdict::Subcritical
    } else if t_v < -tol {
        Verdict::Supercritical
    } else {
        Verdict::Critical { tol }
    };
    Ok(Classification {
        t_v,
        verdict,
        per_channel,
    })
}

/// Bound for the Neumann strip `ln n < y ≤ ln(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripBound {
    pub n: u64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// ln²n · E_L
    pub separated: f64,
    pub correction: f64,
    /// separated − correction
    pub net: f64,
}

/// The data that fixes every strip bound.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StripModel {
    comparison_threshold: f64,
    lambda: f64,
    sup_v: f64,
    sup_dv: f64,
    half_width: f64,
}

impl StripModel {
    fn strip(&self, n: u64) -> StripBound {
        let (lo, hi) = ((n as f64).ln(), ((n + 1) as f64).ln());
        let (separated, correction) = if n == 1 {
            (0.0, self.lambda * self.sup_v * hi * hi)
        } else {
            let gap = (1.0 / n as f64).ln_1p();
            (
                lo * lo * self.comparison_threshold,
                self.lambda * gap * (2.0 * hi * self.sup_v + self.half_width * lo * self.sup_dv),
            )
        };
        StripBound {
            n,
            y_lo: lo,
            y_hi: hi,
            separated,
            correction,
            net: separated - correction + 0.0,
        }
    }

    /// Lower bound on every strip m ≥ n. Valid for n ≥ 3, where the
    /// correction is nonincreasing, and E_L ≥ 0.
    fn tail(&self, n: u64) -> f64 {
        self.strip(n).net
    }
}

fn strip_model(config: &ModelConfig, policy: &ResolutionPolicy) -> Result<StripModel, BracketingError> {
    if let XDomain::Interval { bc, .. } = config.x_domain() {
        if bc != BoundaryCondition::Dirichlet {
            return Err(BracketingError::UnsupportedBoundary(bc));
        }
    }
    let active: Vec<&ChannelSpec> = config.channels().iter().filter(|c| c.lambda != 0.0).collect();
    let omega2 = config.omega() * config.omega();
    match active.as_slice() {
        [] => Ok(StripModel {
            comparison_threshold: omega2,
            lambda: 0.0,
            sup_v: 0.0,
            sup_dv: 0.0,
            half_width: 0.0,
        }),
        // A Dirichlet interval only raises the bottom of each fiber
        // operator, so the full-line threshold stays a lower bound.
        [ch] => {
            let spec = ComparisonSpec::full_line(config.omega(), ch.lambda, ch.profile.clone())?;
            let e = threshold(&spec, policy)?;
            Ok(StripModel {
                comparison_threshold: e,
                lambda: ch.lambda,
                sup_v: ch.profile.max_value(),
                sup_dv: ch.profile.derivative_bound(),
                half_width: ch.profile.half_width(),
            })
        }
        many => Err(BracketingError::MultipleChannels(many.len())),
    }
}

/// Strip bounds for every n in `ns` (n ≥ 1).
pub fn strip_bounds(config: &ModelConfig, ns: std::ops::RangeInclusive<u64>) -> Result<Vec<StripBound>, BracketingError> {
    if *ns.start() == 0 {
        return Err(BracketingError::Invalid("strip indices start at 1".into()));
    }
    let model = strip_model(config, &ResolutionPolicy::default())?;
    if model.comparison_threshold < -DEFAULT_CRITICAL_TOL {
        return Err(BracketingError::Supercritical(model.comparison_threshold));
    }
    Ok(ns.map(|n| model.strip(n)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowerBound {
    Bounded {
        value: f64,
        /// Strip where the minimum is attained (1 is the central region).
        attained_at: u64,
        /// Strips from here on are covered by the tail bound.
        tail_from: u64,
    },
    UnboundedBelow {
        t_v: f64,
    },
}

impl LowerBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Bounded { value, .. } => Some(*value),
            Self::UnboundedBelow { .. } => None,
        }
    }
}

/// inf σ(H) ≥ the returned value, or "unbounded below" when some channel
/// is supercritical. In the critical band the comparison threshold is
/// clamped at 0.
pub fn global_lower_bound(config: &ModelConfig) -> Result<LowerBound, BracketingError> {
    let policy = ResolutionPolicy::default();
    if !config.channels().is_empty() {
        let c = classify_with(config, DEFAULT_CRITICAL_TOL, &policy)?;
        if c.verdict == Verdict::Supercritical {
            return Ok(LowerBound::UnboundedBelow { t_v: c.t_v });
        }
    }
    let mut model = strip_model(config, &policy)?;
    model.comparison_threshold = model.comparison_threshold.max(0.0);
    let mut best = model.strip(1);
    let mut n = 2;
    let mut end = 16;
    loop {
        while n < end {
            let s = model.strip(n);
            if s.net < best.net {
                best = s;
            }
            n += 1;
        }
        if model.tail(end) >= best.net {
            return Ok(LowerBound::Bounded {
                value: best.net,
                attained_at: best.n,
                tail_from: end,
            });
        }
        if end >= MAX_STRIPS {
            return Err(BracketingError::TailNotMonotone(end));
        }
        end *= 2;
    }
}

/// Classification and bound together, in the documented JSON shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketingReport {
    #[serde(flatten)]
    pub classification: Classification,
    pub global_lower_bound: Option<LowerBoundJson>,
}

/// A number, or the string "unbounded below".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LowerBoundJson {
    Value(f64),
    Unbounded(&'static str),
}

impl From<LowerBound> for LowerBoundJson {
    fn from(b: LowerBound) -> Self {
        match b {
            LowerBound::Bounded { value, .. } => Self::Value(value),
            LowerBound::UnboundedBelow { .. } => Self::Unbounded("unbounded below"),
        }
    }
}

/// Runs [`classify`] and, where strip bounds apply, [`global_lower_bound`].
/// The bound is left out (JSON null) for multi-channel subcritical configs.
pub fn report(config: &ModelConfig, tol: f64) -> Result<BracketingReport, BracketingError> {
    let classification = classify(config, tol)?;
    let bound = match global_lower_bound(config) {
        Ok(b) => Some(b.into()),
        Err(BracketingError::MultipleChannels(_) | BracketingError::UnsupportedBoundary(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BracketingReport {
        classification,
        global_lower_bound: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialProfile;
    use crate::oned::critical_coupling;
    use proptest::prelude::*;

    fn cos1() -> PotentialProfile {
        PotentialProfile::cosine(1.0, 1.0).unwrap()
    }

    fn lambda_crit() -> f64 {
        critical_coupling(1.0, &cos1(), 1e-8).unwrap()
    }

    #[test]
    fn zero_coupling_bound_is_zero() {
        let config = ModelConfig::single_channel(1.0, 0.0, cos1()).unwrap();
        let strips = strip_bounds(&config, 1..=50).unwrap();
        for s in &strips {
            assert_eq!(s.correction, 0.0);
            assert!((s.separated - s.y_lo * s.y_lo).abs() < 1e-12);
        }
        let b = global_lower_bound(&config).unwrap();
        assert_eq!(b.value(), Some(0.0));
        let empty = ModelConfig::new(1.0, vec![], XDomain::FullLine).unwrap();
        assert_eq!(global_lower_bound(&empty).unwrap().value(), Some(0.0));
        assert!(matches!(classify(&empty, 1e-6), Err(BracketingError::NoChannels)));
    }

    #[test]
    fn strips_partition_the_half_line() {
        let config = ModelConfig::single_channel(1.0, 1.0, cos1()).unwrap();
        let strips = strip_bounds(&config, 1..=100).unwrap();
        assert_eq!(strips[0].y_lo, 0.0);
        for w in strips.windows(2) {
            assert_eq!(w[0].y_hi, w[1].y_lo);
            assert!((w[0].net - (w[0].separated - w[0].correction)).abs() < 1e-15);
        }
    }

    #[test]
    fn correction_halves_with_log_factor() {
        let config = ModelConfig::single_channel(1.0, 1.0, cos1()).unwrap();
        let model = strip_model(&config, &ResolutionPolicy::default()).unwrap();
        let mut last = f64::INFINITY;
        for m in [10u32, 14, 18, 22] {
            let n = 1u64 << m;
            let ratio = model.strip(2 * n).correction / model.strip(n).correction;
            let expected = 0.5 * ((2 * n) as f64).ln() / (n as f64).ln();
            let gap = (ratio - expected).abs();
            assert!(gap < last, "m {m}: {ratio} vs {expected}");
            assert!(gap < 1e-3);
            last = gap;
        }
    }

    #[test]
    fn subcritical_nets_diverge() {
        let lambda = 0.5 * lambda_crit();
        let config = ModelConfig::single_channel(1.0, lambda, cos1()).unwrap();
        let strips = strip_bounds(&config, 1..=100_000).unwrap();
        let tail = &strips[strips.len() - 10..];
        assert!(tail.windows(2).all(|w| w[1].net > w[0].net));
        assert!(strips.last().unwrap().net > 20.0);
        let bound = global_lower_bound(&config).unwrap().value().unwrap();
        let min = strips.iter().map(|s| s.net).fold(f64::INFINITY, f64::min);
        assert_eq!(bound, min);
        assert!(bound <= strips[0].net);
        assert!((strips[0].net + lambda * std::f64::consts::LN_2.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn supercritical_is_unbounded() {
        let config = ModelConfig::single_channel(1.0, 1.5 * lambda_crit(), cos1()).unwrap();
        assert!(matches!(
            global_lower_bound(&config).unwrap(),
            LowerBound::UnboundedBelow { t_v } if t_v < 0.0
        ));
        assert!(matches!(strip_bounds(&config, 1..=4), Err(BracketingError::Supercritical(_))));
    }

    #[test]
    fn classify_takes_the_minimum() {
        let strong = ChannelSpec::new(4.0, -3.0, cos1()).unwrap();
        let weak = ChannelSpec::new(0.1, 3.0, cos1()).unwrap();
        let config = ModelConfig::new(1.0, vec![strong.clone(), weak.clone()], XDomain::FullLine).unwrap();
        let c = classify(&config, 1e-6).unwrap();
        assert_eq!(c.verdict, Verdict::Supercritical);
        assert_eq!(c.t_v, c.per_channel[0].threshold);
        assert!(c.per_channel[1].threshold > 0.0);
        let swapped = ModelConfig::new(1.0, vec![weak, strong], XDomain::FullLine).unwrap();
        let d = classify(&swapped, 1e-6).unwrap();
        assert_eq!(c.t_v, d.t_v);
        assert!(matches!(global_lower_bound(&config).unwrap(), LowerBound::UnboundedBelow { .. }));
        let json = serde_json::to_value(report(&config, 1e-6).unwrap()).unwrap();
        assert_eq!(json["verdict"]["kind"], "supercritical");
        assert_eq!(json["global_lower_bound"], "unbounded below");
        assert_eq!(json["per_channel"].as_array().unwrap().len(), 2);
        assert!(json["t_V"].is_number());
    }

    #[test]
    fn interval_channels_use_their_centers() {
        let ch = ChannelSpec::new(1.0, 0.5, PotentialProfile::cosine(0.25, 1.0).unwrap()).unwrap();
        let xd = XDomain::Interval {
            half_width: 1.0,
            bc: BoundaryCondition::Neumann,
        };
        let config = ModelConfig::new(1.0, vec![ch], xd).unwrap();
        let c = classify(&config, 1e-6).unwrap();
        assert!(c.t_v < 1.0 && c.t_v > 0.0);
        assert!(matches!(
            global_lower_bound(&config),
            Err(BracketingError::UnsupportedBoundary(BoundaryCondition::Neumann))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let config = ModelConfig::single_channel(1.0, 1.0, cos1()).unwrap();
        assert!(classify(&config, 0.0).unwrap_err().is_config());
        assert!(strip_bounds(&config, 0..=3).unwrap_err().is_config());
        let two = ModelConfig::new(
            1.0,
            vec![
                ChannelSpec::new(1.0, -3.0, cos1()).unwrap(),
                ChannelSpec::new(1.0, 3.0, cos1()).unwrap(),
            ],
            XDomain::FullLine,
        )
        .unwrap();
        assert!(matches!(strip_bounds(&two, 1..=3), Err(BracketingError::MultipleChannels(2))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn correction_is_nonincreasing_from_three(n in 3u64..10_000_000, lambda in 0.01f64..10.0) {
            let model = StripModel {
                comparison_threshold: 0.0,
                lambda,
                sup_v: 1.0,
                sup_dv: std::f64::consts::FRAC_PI_2,
                half_width: 1.0,
            };
            prop_assert!(model.strip(n + 1).correction <= model.strip(n).correction);
        }
    }
}
