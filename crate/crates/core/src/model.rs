//! Potential profiles, channels and the full model configuration.
//!
//! The 2D potential is
//!
//! ```text
//! W(x, y) = ω² y² − Σ_j λ_j y² V_j((x − b_j) y)
//! ```
//!
//! Each channel is a translate in x of the centered construction. An optional
//! cutoff switches the channel terms off for |y| < y₀; the asymptotic
//! behaviour as |y| → ∞ is unaffected by it.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("tabulated profile: {0}")]
    Table(String),
    #[error("channels {0} and {1} have overlapping supports")]
    OverlappingChannels(usize, usize),
    #[error("channel {channel} (support up to |x| = {reach}) does not fit inside the interval of half-width {c}")]
    ChannelOutsideInterval { channel: usize, reach: f64, c: f64 },
    #[error("malformed configuration: {0}")]
    Malformed(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

/// Monotone C¹ piecewise-cubic table, zero outside its abscissa range.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedShape {
    t: Vec<f64>,
    v: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedShape {
    /// Builds the interpolant. End values must vanish; end slopes are
    /// clamped to zero so the zero extension stays C¹.
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self, ConfigError> {
        if t.len() != v.len() || t.len() < 3 {
            return Err(ConfigError::Table("need at least 3 (t, v) pairs".into()));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConfigError::Table("abscissae must be strictly increasing".into()));
        }
        if v.iter().chain(&t).any(|x| !x.is_finite()) || v.iter().any(|&x| x < 0.0) {
            return Err(ConfigError::Table("values must be finite and nonnegative".into()));
        }
        if v[0] != 0.0 || v[v.len() - 1] != 0.0 {
            return Err(ConfigError::Table("first and last values must be 0".into()));
        }
        let n = t.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (v[i + 1] - v[i]) / (t[i + 1] - t[i])).collect();
        let mut slopes = vec![0.0; n];
        // Fritsch–Carlson weighted harmonic mean; zero at local extrema.
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            if d0 * d1 > 0.0 {
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        Ok(Self { t, v, slopes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let (lo, hi) = self.range();
        if x <= lo || x >= hi {
            return (0.0, 0.0);
        }
        let i = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            p => p - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (x - self.t[i]) / h;
        let (y0, y1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let val = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let der = (6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * m1;
        (val, der / h)
    }

    /// Exact sup of |V′|: the derivative of each cubic is a quadratic.
    fn derivative_bound(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.t.len() - 1 {
            let h = self.t[i + 1] - self.t[i];
            let (y0, y1) = (self.v[i], self.v[i + 1]);
            let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
            // d/ds of the Hermite cubic: A s² + B s + C
            let a = 6.0 * y0 + 3.0 * m0 - 6.0 * y1 + 3.0 * m1;
            let b = -6.0 * y0 - 4.0 * m0 + 6.0 * y1 - 2.0 * m1;
            let c = m0;
            let mut cand = vec![0.0, 1.0];
            if a != 0.0 {
                let s = -b / (2.0 * a);
                if (0.0..=1.0).contains(&s) {
                    cand.push(s);
                }
            }
            for s in cand {
                best = best.max(((a * s + b) * s + c).abs() / h);
            }
        }
        best
    }

    fn max_value(&self) -> f64 {
        // Monotone pieces never overshoot the data.
        self.v.iter().copied().fold(0.0, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.v.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileFamily {
    /// cos²(πt/(2a)) on [−a, a]
    CosineSquared,
    /// (1 − (t/a)²)² on [−a, a]
    Quartic,
    Tabulated(TabulatedShape),
}

/// A compactly supported, nonnegative C¹ channel profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    family: ProfileFamily,
    half_width: f64,
    amplitude: f64,
}

impl PotentialProfile {
    pub fn new(family: ProfileFamily, half_width: f64, amplitude: f64) -> Result<Self, ConfigError> {
        positive("a", half_width)?;
        positive("amplitude", amplitude)?;
        if let ProfileFamily::Tabulated(shape) = &family {
            let (lo, hi) = shape.range();
            if lo < -half_width || hi > half_width {
                return Err(ConfigError::Table(format!(
                    "table range [{lo}, {hi}] exceeds the declared support [-{half_width}, {half_width}]"
                )));
            }
        }
        Ok(Self {
            family,
            half_width,
            amplitude,
        })
    }

    pub fn cosine(half_width: f64, amplitude: f64) -> Result<Self, ConfigError> {
        Self::new(ProfileFamily::CosineSquared, half_width, amplitude)
    }

    pub fn quartic(half_width: f64, amplitude: f64) -> Result<Self, ConfigError> {
        Self::new(ProfileFamily::Quartic, half_width, amplitude)
    }

    pub fn family(&self) -> &ProfileFamily {
        &self.family
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self, ConfigError> {
        Self::new(self.family.clone(), self.half_width, amplitude)
    }

    /// (V(t), V′(t)); the zero pair outside the support.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let a = self.half_width;
        if t.abs() >= a {
            return (0.0, 0.0);
        }
        let amp = self.amplitude;
        match &self.family {
            ProfileFamily::CosineSquared => {
                let arg = PI * t / (2.0 * a);
                let c = arg.cos();
                (amp * c * c, -amp * PI / (2.0 * a) * (2.0 * arg).sin())
            }
            ProfileFamily::Quartic => {
                let s = t / a;
                let w = 1.0 - s * s;
                (amp * w * w, -4.0 * amp * s * w / a)
            }
            ProfileFamily::Tabulated(shape) => {
                let (v, d) = shape.eval(t);
                (amp * v, amp * d)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// sup V
    pub fn max_value(&self) -> f64 {
        match &self.family {
            ProfileFamily::CosineSquared | ProfileFamily::Quartic => self.amplitude,
            ProfileFamily::Tabulated(shape) => self.amplitude * shape.max_value(),
        }
    }

    /// sup |V′|
    pub fn derivative_bound(&self) -> f64 {
        let a = self.half_width;
        match &self.family {
            ProfileFamily::CosineSquared => self.amplitude * PI / (2.0 * a),
            ProfileFamily::Quartic => self.amplitude * 8.0 / (3.0 * 3f64.sqrt() * a),
            ProfileFamily::Tabulated(shape) => self.amplitude * shape.derivative_bound(),
        }
    }

    /// Abscissa of the profile maximum.
    pub fn peak(&self) -> f64 {
        match &self.family {
            ProfileFamily::CosineSquared | ProfileFamily::Quartic => 0.0,
            ProfileFamily::Tabulated(shape) => {
                let mut best = (0.0, f64::NEG_INFINITY);
                for (t, v) in shape.points() {
                    if v > best.1 {
                        best = (t, v);
                    }
                }
                best.0
            }
        }
    }

    pub fn is_even(&self) -> bool {
        match &self.family {
            ProfileFamily::CosineSquared | ProfileFamily::Quartic => true,
            ProfileFamily::Tabulated(shape) => {
                let (lo, hi) = shape.range();
                (lo + hi).abs() < 1e-14 * hi.abs().max(1.0)
                    && shape.points().all(|(t, v)| (shape.eval(-t).0 - v).abs() <= 1e-14 * v.abs().max(1.0))
            }
        }
    }

    /// Points where the profile is only C¹ (support ends and table knots).
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            ProfileFamily::Tabulated(shape) => shape.points().map(|(t, _)| t).collect(),
            _ => vec![-self.half_width, self.half_width],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub lambda: f64,
    pub center: f64,
    pub profile: PotentialProfile,
}

impl ChannelSpec {
    pub fn new(lambda: f64, center: f64, profile: PotentialProfile) -> Result<Self, ConfigError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ConfigError::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "must be finite and >= 0",
            });
        }
        if !center.is_finite() {
            return Err(ConfigError::InvalidParameter {
                name: "center",
                value: center,
                reason: "must be finite",
            });
        }
        Ok(Self { lambda, center, profile })
    }

    pub fn support(&self) -> (f64, f64) {
        let a = self.profile.half_width();
        (self.center - a, self.center + a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XDomain {
    FullLine,
    Interval { half_width: f64, bc: BoundaryCondition },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    omega: f64,
    channels: Vec<ChannelSpec>,
    x_domain: XDomain,
    y_cutoff: Option<f64>,
}

impl ModelConfig {
    pub fn new(omega: f64, channels: Vec<ChannelSpec>, x_domain: XDomain) -> Result<Self, ConfigError> {
        positive("omega", omega)?;
        for j in 0..channels.len() {
            for k in j + 1..channels.len() {
                let (lj, hj) = channels[j].support();
                let (lk, hk) = channels[k].support();
                if lj < hk && lk < hj {
                    return Err(ConfigError::OverlappingChannels(j, k));
                }
            }
        }
        if let XDomain::Interval { half_width, .. } = x_domain {
            positive("c", half_width)?;
            for (j, ch) in channels.iter().enumerate() {
                let reach = ch.center.abs() + ch.profile.half_width();
                if reach > half_width * (1.0 + 1e-12) {
                    return Err(ConfigError::ChannelOutsideInterval {
                        channel: j,
                        reach,
                        c: half_width,
                    });
                }
            }
        }
        Ok(Self {
            omega,
            channels,
            x_domain,
            y_cutoff: None,
        })
    }

    /// Single centered channel on the full line.
    pub fn single_channel(omega: f64, lambda: f64, profile: PotentialProfile) -> Result<Self, ConfigError> {
        Self::new(omega, vec![ChannelSpec::new(lambda, 0.0, profile)?], XDomain::FullLine)
    }

    /// Switches channel terms off for |y| < y₀.
    pub fn with_y_cutoff(mut self, y0: f64) -> Result<Self, ConfigError> {
        positive("y_cutoff", y0)?;
        self.y_cutoff = Some(y0);
        Ok(self)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn x_domain(&self) -> XDomain {
        self.x_domain
    }

    pub fn y_cutoff(&self) -> Option<f64> {
        self.y_cutoff
    }

    /// Largest |b_j| + a_j over the channels, or 0 without channels.
    pub fn channel_reach(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.center.abs() + c.profile.half_width())
            .fold(0.0, f64::max)
    }

    pub fn eval_potential_2d(&self, x: f64, y: f64) -> f64 {
        eval_potential_2d(self, x, y)
    }
}

/// W(x, y) = ω² y² − Σ λ_j y² V_j((x − b_j) y).
pub fn eval_potential_2d(config: &ModelConfig, x: f64, y: f64) -> f64 {
    let y2 = y * y;
    let mut w = config.omega * config.omega * y2;
    if config.y_cutoff.is_some_and(|y0| y.abs() < y0) {
        return w;
    }
    for ch in &config.channels {
        if ch.lambda != 0.0 {
            w -= ch.lambda * y2 * ch.profile.value((x - ch.center) * y);
        }
    }
    w
}

/// (V(t), V′(t)) of a profile.
pub fn eval_profile(profile: &PotentialProfile, t: f64) -> (f64, f64) {
    profile.eval(t)
}

// --- JSON schema -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileJson {
    pub family: String,
    pub a: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelJson {
    pub lambda: f64,
    #[serde(default)]
    pub center: f64,
    pub profile: ProfileJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XDomainJson {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BoundaryCondition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigJson {
    pub omega: f64,
    #[serde(default)]
    pub channels: Vec<ChannelJson>,
    pub x_domain: XDomainJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_cutoff: Option<f64>,
}

impl TryFrom<&ProfileJson> for PotentialProfile {
    type Error = ConfigError;

    fn try_from(p: &ProfileJson) -> Result<Self, ConfigError> {
        let family = match p.family.as_str() {
            "cos2" => ProfileFamily::CosineSquared,
            "quartic" => ProfileFamily::Quartic,
            "table" => {
                let table = p
                    .table
                    .as_ref()
                    .ok_or_else(|| ConfigError::Malformed("family \"table\" requires a \"table\" array".into()))?;
                let (t, v) = table.iter().map(|r| (r[0], r[1])).unzip();
                ProfileFamily::Tabulated(TabulatedShape::new(t, v)?)
            }
            other => return Err(ConfigError::Malformed(format!("unknown profile family \"{other}\""))),
        };
        PotentialProfile::new(family, p.a, p.amplitude)
    }
}

impl TryFrom<&ModelConfigJson> for ModelConfig {
    type Error = ConfigError;

    fn try_from(raw: &ModelConfigJson) -> Result<Self, ConfigError> {
        let channels = raw
            .channels
            .iter()
            .map(|c| ChannelSpec::new(c.lambda, c.center, PotentialProfile::try_from(&c.profile)?))
            .collect::<Result<Vec<_>, _>>()?;
        let x_domain = match raw.x_domain.kind.as_str() {
            "line" => XDomain::FullLine,
            "interval" => XDomain::Interval {
                half_width: raw
                    .x_domain
                    .c
                    .ok_or_else(|| ConfigError::Malformed("interval domain requires \"c\"".into()))?,
                bc: raw.x_domain.bc.unwrap_or(BoundaryCondition::Dirichlet),
            },
            other => return Err(ConfigError::Malformed(format!("unknown x_domain type \"{other}\""))),
        };
        let config = ModelConfig::new(raw.omega, channels, x_domain)?;
        match raw.y_cutoff {
            Some(y0) => config.with_y_cutoff(y0),
            None => Ok(config),
        }
    }
}

impl From<&PotentialProfile> for ProfileJson {
    fn from(p: &PotentialProfile) -> Self {
        let (family, table) = match p.family() {
            ProfileFamily::CosineSquared => ("cos2", None),
            ProfileFamily::Quartic => ("quartic", None),
            ProfileFamily::Tabulated(shape) => ("table", Some(shape.points().map(|(t, v)| [t, v]).collect())),
        };
        Self {
            family: family.to_string(),
            a: p.half_width(),
            amplitude: p.amplitude(),
            table,
        }
    }
}

impl From<&ModelConfig> for ModelConfigJson {
    fn from(c: &ModelConfig) -> Self {
        let x_domain = match c.x_domain {
            XDomain::FullLine => XDomainJson {
                kind: "line".into(),
                c: None,
                bc: None,
            },
            XDomain::Interval { half_width, bc } => XDomainJson {
                kind: "interval".into(),
                c: Some(half_width),
                bc: Some(bc),
            },
        };
        Self {
            omega: c.omega,
            channels: c
                .channels
                .iter()
                .map(|ch| ChannelJson {
                    lambda: ch.lambda,
                    center: ch.center,
                    profile: (&ch.profile).into(),
                })
                .collect(),
            x_domain,
            y_cutoff: c.y_cutoff,
        }
    }
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: ModelConfigJson = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        Self::try_from(&raw)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelConfigJson::from(self)).expect("config serializes")
    }
}
