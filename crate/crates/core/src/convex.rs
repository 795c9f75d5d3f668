//! Young functions and the convex machinery built on them: Bregman
//! divergences, Legendre conjugates, the Δ₂ constant, Simonenko indices and
//! the Doob constant.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Scalar function of one real variable, shareable across threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Negative Bregman values above this (relative) threshold are rounding.
const CLAMP_SLACK: f64 = 1e-12;

/// Builtin families and user-defined functions.
#[derive(Clone)]
enum Kind {
    /// |λ|^p
    Power { p: f64 },
    /// |λ|^p · log^γ(e + |λ|)
    PowerLog { p: f64, gamma: f64 },
    Custom(Arc<Custom>),
}

struct Custom {
    name: String,
    eval: ScalarFn,
    deriv: ScalarFn,
    second: SecondDerivative,
}

/// How a user-defined Young function supplies φ″.
#[derive(Clone)]
pub enum SecondDerivative {
    Analytic(ScalarFn),
    /// Central difference of φ′ with step max(1e-6, 1e-6·|λ|).
    CentralDifference,
    Unavailable,
}

/// Family identifier with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyTag {
    Power { p: f64 },
    Plog { p: f64, gamma: f64 },
    Custom { name: String },
}

/// Exact values of K_φ, d_φ and D_φ for families that admit them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub k_phi: f64,
    pub lower_index: f64,
    pub upper_index: f64,
}

/// An even, convex, C¹ Young function with analytic derivatives.
#[derive(Clone)]
pub struct YoungFunction {
    kind: Kind,
}

impl fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "YoungFunction({:?})", self.family_tag())
    }
}

#[inline]
fn pow_abs(u: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 64.0 {
        u.powi(p as i32)
    } else {
        u.powf(p)
    }
}

impl YoungFunction {
    /// Looks up a builtin family: `power` (params `[p]`) or `plog`
    /// (params `[p, γ]`).
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        match (name, params) {
            ("power", [p]) => Self::power(*p),
            ("plog", [p, gamma]) => Self::power_log(*p, *gamma),
            ("power" | "plog", _) => Err(Error::InvalidParameter(format!(
                "wrong number of parameters for `{name}`: {}",
                params.len()
            ))),
            _ => Err(Error::UnknownFamily(name.to_string())),
        }
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power family needs p in (1, ∞), got {p}"
            )));
        }
        Ok(Self {
            kind: Kind::Power { p },
        })
    }

    pub fn power_log(p: f64, gamma: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "plog family needs p in (1, ∞), got {p}"
            )));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite γ = {gamma}")));
        }
        let phi = Self {
            kind: Kind::PowerLog { p, gamma },
        };
        phi.check_numerical_convexity()?;
        Ok(phi)
    }

    /// Wraps user-supplied φ and φ′. Sampled Young-function axioms are
    /// checked before the function is accepted.
    pub fn custom(
        name: impl Into<String>,
        eval: ScalarFn,
        deriv: ScalarFn,
        second: SecondDerivative,
    ) -> Result<Self> {
        let phi = Self {
            kind: Kind::Custom(Arc::new(Custom {
                name: name.into(),
                eval,
                deriv,
                second,
            })),
        };
        phi.check_axioms()?;
        Ok(phi)
    }

    pub fn family_tag(&self) -> FamilyTag {
        match &self.kind {
            Kind::Power { p } => FamilyTag::Power { p: *p },
            Kind::PowerLog { p, gamma } => FamilyTag::Plog {
                p: *p,
                gamma: *gamma,
            },
            Kind::Custom(c) => FamilyTag::Custom {
                name: c.name.clone(),
            },
        }
    }

    /// The exponent when φ(λ) = |λ|^p.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { p } => Some(p),
            _ => None,
        }
    }

    pub fn closed_forms(&self) -> Option<ClosedForms> {
        match self.kind {
            Kind::Power { p } => Some(ClosedForms {
                k_phi: 2f64.powf(p),
                lower_index: p,
                upper_index: p,
            }),
            _ => None,
        }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let u = lambda.abs();
        match &self.kind {
            Kind::Power { p } => pow_abs(u, *p),
            Kind::PowerLog { p, gamma } => {
                if u == 0.0 {
                    return 0.0;
                }
                pow_abs(u, *p) * (std::f64::consts::E + u).ln().powf(*gamma)
            }
            Kind::Custom(c) => (c.eval)(lambda),
        }
    }

    pub fn deriv(&self, lambda: f64) -> f64 {
        let u = lambda.abs();
        let s = lambda.signum();
        match &self.kind {
            Kind::Power { p } => {
                if u == 0.0 {
                    0.0
                } else {
                    s * p * pow_abs(u, p - 1.0)
                }
            }
            Kind::PowerLog { p, gamma } => {
                if u == 0.0 {
                    return 0.0;
                }
                let e_u = std::f64::consts::E + u;
                let l = e_u.ln();
                let d = p * pow_abs(u, p - 1.0) * l.powf(*gamma)
                    + gamma * pow_abs(u, *p) * l.powf(gamma - 1.0) / e_u;
                s * d
            }
            Kind::Custom(c) => (c.deriv)(lambda),
        }
    }

    pub fn has_second_deriv(&self) -> bool {
        !matches!(&self.kind, Kind::Custom(c) if matches!(c.second, SecondDerivative::Unavailable))
    }

    /// False when φ″ comes from the central-difference fallback.
    pub fn second_deriv_is_exact(&self) -> bool {
        match &self.kind {
            Kind::Custom(c) => matches!(c.second, SecondDerivative::Analytic(_)),
            _ => true,
        }
    }

    /// φ″(λ). For |λ|^p with p < 2 the value at 0 is +∞.
    pub fn second_deriv(&self, lambda: f64) -> Result<f64> {
        let u = lambda.abs();
        Ok(match &self.kind {
            Kind::Power { p } => {
                if *p == 2.0 {
                    2.0
                } else {
                    p * (p - 1.0) * pow_abs(u, p - 2.0)
                }
            }
            Kind::PowerLog { p, gamma } => {
                let e_u = std::f64::consts::E + u;
                let l = e_u.ln();
                let mut v = p * (p - 1.0) * pow_abs(u, p - 2.0) * l.powf(*gamma);
                if u > 0.0 {
                    v += 2.0 * p * gamma * pow_abs(u, p - 1.0) * l.powf(gamma - 1.0) / e_u
                        + gamma * pow_abs(u, *p) * l.powf(gamma - 2.0) * (gamma - 1.0 - l)
                            / (e_u * e_u);
                }
                v
            }
            Kind::Custom(c) => match &c.second {
                SecondDerivative::Analytic(f) => f(lambda),
                SecondDerivative::CentralDifference => self.central_difference(lambda),
                SecondDerivative::Unavailable => return Err(Error::MissingSecondDerivative),
            },
        })
    }

    fn central_difference(&self, lambda: f64) -> f64 {
        let h = (1e-6 * lambda.abs()).max(1e-6);
        (self.deriv(lambda + h) - self.deriv(lambda - h)) / (2.0 * h)
    }

    fn raw_divergence(&self, x: f64, y: f64) -> (f64, f64) {
        let fy = self.eval(y);
        let fx = self.eval(x);
        let lin = self.deriv(x) * (y - x);
        let v = fy - fx - lin;
        let scale = fy.abs().max(fx.abs()).max(lin.abs()).max(1.0);
        (v, scale)
    }

    /// F_φ(x, y) = φ(y) − φ(x) − φ′(x)(y − x). Rounding-level negatives are
    /// clamped to zero, anything below that is reported.
    pub fn bregman_divergence(&self, x: f64, y: f64) -> Result<f64> {
        let (v, scale) = self.raw_divergence(x, y);
        if v >= 0.0 {
            Ok(v)
        } else if v >= -CLAMP_SLACK * scale {
            Ok(0.0)
        } else {
            Err(Error::ConvexityViolation { x, y, value: v })
        }
    }

    /// Clamped divergence for inner loops over certified functions.
    #[inline]
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        if x == y {
            return 0.0;
        }
        let (v, _) = self.raw_divergence(x, y);
        v.max(0.0)
    }

    /// φ*(γ) = sup_{λ ≥ 0} (|γ|λ − φ(λ)), with the maximiser found by
    /// bisection on φ′(λ) = |γ| after expanding the bracket up to `bracket_cap`.
    pub fn legendre_transform(&self, gamma: f64, bracket_cap: f64) -> Result<f64> {
        if !(bracket_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bracket cap must be positive, got {bracket_cap}"
            )));
        }
        let g = gamma.abs();
        if g == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0f64.min(bracket_cap);
        let mut lo = 0.0;
        while self.deriv(hi) < g {
            if hi >= bracket_cap {
                return Err(Error::ConjugateUnresolved {
                    gamma: g,
                    cap: bracket_cap,
                });
            }
            lo = hi;
            hi = (2.0 * hi).min(bracket_cap);
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.deriv(mid) < g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let objective = |l: f64| g * l - self.eval(l);
        Ok(objective(lo).max(objective(hi)).max(0.0))
    }

    /// Grid estimate of the Δ₂ constant sup φ(2λ)/φ(λ).
    pub fn delta2_constant(&self, grid: &LogGrid) -> Result<Delta2Certificate> {
        let mut k: f64 = 0.0;
        for &l in grid.points() {
            let base = self.eval(l);
            if base <= 0.0 {
                return Err(Error::Degenerate(format!("φ({l}) = {base}")));
            }
            k = k.max(self.eval(2.0 * l) / base);
        }
        let exact = self
            .closed_forms()
            .is_some_and(|c| ((k - c.k_phi) / c.k_phi).abs() <= 1e-9);
        Ok(Delta2Certificate {
            k_phi: if exact {
                self.closed_forms().map_or(k, |c| c.k_phi)
            } else {
                k
            },
            grid: grid.descriptor(),
            exact,
        })
    }

    /// Grid estimates of inf and sup of λφ′(λ)/φ(λ), overridden by closed
    /// forms when the family has them.
    pub fn simonenko_indices(&self, grid: &LogGrid) -> Result<SimonenkoIndices> {
        if grid.lo > 1e-8 * (1.0 + 1e-12) || grid.hi < 1e8 * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "index grid must span [1e-8, 1e8], got [{}, {}]",
                grid.lo, grid.hi
            )));
        }
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for &l in grid.points() {
            let r = l * self.deriv(l) / self.eval(l);
            if !r.is_finite() {
                return Err(Error::NonFiniteRatio(l));
            }
            lower = lower.min(r);
            upper = upper.max(r);
        }
        if let Some(c) = self.closed_forms() {
            return Ok(SimonenkoIndices {
                lower: c.lower_index,
                upper: c.upper_index,
                exact: true,
            });
        }
        let lower = lower.max(1.0);
        Ok(SimonenkoIndices {
            lower,
            upper: upper.max(lower),
            exact: false,
        })
    }

    /// Simonenko indices on the default grid.
    pub fn indices(&self) -> Result<SimonenkoIndices> {
        self.simonenko_indices(&LogGrid::default())
    }

    fn check_numerical_convexity(&self) -> Result<()> {
        for &l in LogGrid::default().points() {
            let d1 = self.deriv(l);
            let d2 = self.central_difference(l);
            if d1 < 0.0 || d2 < -1e-6 * (d1 / l).abs() {
                return Err(Error::InvalidParameter(format!(
                    "{:?} is not convex near λ = {l:.3e} (φ″ ≈ {d2:.3e})",
                    self.family_tag()
                )));
            }
        }
        Ok(())
    }

    fn check_axioms(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} fails for {self:?}")));
        if self.eval(0.0) != 0.0 || self.deriv(0.0) != 0.0 {
            return bad("φ(0) = φ′(0) = 0");
        }
        let samples: Vec<f64> = LogGrid::new(1e-3, 1e3, 61)?.points().to_vec();
        for &l in &samples {
            let (a, b) = (self.eval(l), self.eval(-l));
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return bad("evenness");
            }
        }
        for w in samples.windows(2) {
            if self.deriv(w[1]) < self.deriv(w[0]) {
                return bad("monotone φ′");
            }
            let (a, b) = (-w[1], w[0]);
            let mid = self.eval(0.5 * (a + b));
            if mid > 0.5 * (self.eval(a) + self.eval(b)) * (1.0 + 1e-12) {
                return bad("midpoint convexity");
            }
        }
        if self.eval(1e-8) / 1e-8 > self.eval(1e-4) / 1e-4 || self.eval(1e8) / 1e8 <= 1.0 {
            return bad("φ(λ)/λ growth");
        }
        Ok(())
    }
}

/// Parses `power:P` or `plog:P:GAMMA`.
impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default().trim();
        let params = parts
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad number `{t}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::builtin(name, &params)
    }
}

/// Log-spaced positive points used for certification.
#[derive(Debug, Clone)]
pub struct LogGrid {
    lo: f64,
    hi: f64,
    points: Vec<f64>,
}

/// Serializable summary of a [`LogGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridDescriptor {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LogGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(Error::InvalidParameter(format!(
                "log grid needs 0 < lo ≤ hi and n ≥ 1, got [{lo}, {hi}] × {n}"
            )));
        }
        let points = if n == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        };
        Ok(Self { lo, hi, points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            lo: self.lo,
            hi: self.hi,
            n: self.points.len(),
        }
    }
}

impl Default for LogGrid {
    /// 400 points on [1e-8, 1e8].
    fn default() -> Self {
        Self::new(1e-8, 1e8, 400).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta2Certificate {
    pub k_phi: f64,
    pub grid: GridDescriptor,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimonenkoIndices {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl SimonenkoIndices {
    pub fn is_moderate(&self) -> bool {
        self.lower > 1.0 && self.upper.is_finite()
    }

    /// C_φ = (d_φ / (d_φ − 1))^{D_φ}.
    pub fn doob_constant(&self) -> Result<f64> {
        if !self.is_moderate() {
            return Err(Error::NotModerate { lower: self.lower });
        }
        Ok((self.lower / (self.lower - 1.0)).powf(self.upper))
    }
}

/// Doob constant from a pair of indices.
pub fn doob_constant(lower: f64, upper: f64) -> Result<f64> {
    SimonenkoIndices {
        lower,
        upper,
        exact: true,
    }
    .doob_constant()
}
