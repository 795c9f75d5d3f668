//! Lévy symbols and the convolution semigroup on a periodic grid.
//!
//! The grid is x_j = −L + jΔx, j = 0..N with N = 2^m and Δx = 2L/N. The
//! discrete frequencies are ξ_k = πk/L (signed, |k| ≤ N/2), so multiplying
//! the FFT of the samples by e^{−tψ(ξ_k)} and inverting gives P_t f on the
//! grid up to the periodic wrap-around.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::{JumpLaw, JumpPart, LevyModel};
use crate::quad::GaussLegendre;

/// Resolution threshold for e^{−tψ} at the Nyquist frequency.
pub const RESOLUTION_TOL: f64 = 1e-12;
/// Negative density values above this are rounding noise and clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-10;
/// Default Hartman–Wintner threshold for ψ(ξ)/log ξ at ξ_max.
pub const HW_THRESHOLD: f64 = 50.0;

/// ψ(ξ) = ½σ²ξ² + ∫(1 − cos ξz) ν(dz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevySymbol {
    pub sigma2: f64,
    pub jumps: JumpPart,
}

impl LevySymbol {
    pub fn new(sigma2: f64, jumps: JumpPart) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be nonnegative, got {sigma2}"
            )));
        }
        jumps.validate(true)?;
        Ok(Self { sigma2, jumps })
    }

    pub fn gaussian(sigma2: f64) -> Self {
        Self {
            sigma2,
            jumps: JumpPart::None,
        }
    }

    pub fn from_model(model: &LevyModel) -> Result<Self> {
        Self::new(model.sigma2, model.jumps)
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        if xi == 0.0 {
            return 0.0;
        }
        let diffusion = 0.5 * self.sigma2 * xi * xi;
        let jump = match self.jumps {
            JumpPart::None => 0.0,
            JumpPart::CompoundPoisson { intensity, law } => {
                intensity
                    * match law {
                        JumpLaw::TwoPoint { a } => 1.0 - (a * xi).cos(),
                        JumpLaw::Uniform { a } => 1.0 - sinc(a * xi),
                        JumpLaw::Gaussian { s } => -(-0.5 * s * s * xi * xi).exp_m1(),
                    }
            }
            JumpPart::TruncatedStable {
                alpha,
                c,
                eps,
                z_max,
            } => {
                let hi = z_max.map_or(f64::INFINITY, |z| xi * z);
                2.0 * c * xi.powf(alpha) * stable_profile(alpha, xi * eps, hi)
            }
        };
        diffusion + jump
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// ∫_0^∞ (1 − cos u) u^{−1−α} du = −Γ(−α) cos(πα/2), with the limit π/2 at α = 1.
pub fn stable_constant(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-9 {
        PI / 2.0
    } else {
        -statrs::function::gamma::gamma(-alpha) * (PI * alpha / 2.0).cos()
    }
}

/// ∫_0^x (1 − cos u) u^{−1−α} du for x ≤ 1, summed termwise.
fn profile_head(alpha: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut fact = 1.0;
    let mut sign = 1.0;
    for k in 1..=12 {
        let two_k = 2 * k;
        fact *= ((two_k - 1) * two_k) as f64;
        let e = two_k as f64 - alpha;
        let term = sign * x.powf(e) / (fact * e);
        total += term;
        if term.abs() < 1e-17 * total.abs() {
            break;
        }
        sign = -sign;
    }
    total
}

const ASYMPTOTIC_FROM: f64 = 64.0;

/// ∫_b^∞ cos(u) u^{−s} du by repeated integration by parts (b ≥ 64).
fn cos_tail(b: f64, s: f64) -> f64 {
    let (sin_b, cos_b) = b.sin_cos();
    let mut total = 0.0;
    let mut coeff = 1.0;
    let mut r = s;
    for _ in 0..12 {
        total += coeff * (-sin_b * b.powf(-r) + r * cos_b * b.powf(-r - 1.0));
        coeff *= -r * (r + 1.0);
        r += 2.0;
    }
    total
}

/// ∫_x^∞ (1 − cos u) u^{−1−α} du for x ≥ 1.
fn profile_tail(alpha: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let s = 1.0 + alpha;
    let far = x.max(ASYMPTOTIC_FROM);
    let mut total = far.powf(-alpha) / alpha - cos_tail(far, s);
    if x < ASYMPTOTIC_FROM {
        let gl = GaussLegendre::new(16);
        let panels = (ASYMPTOTIC_FROM - x).ceil() as usize;
        total += gl.composite(x, ASYMPTOTIC_FROM, panels, |u| (1.0 - u.cos()) * u.powf(-s));
    }
    total
}

/// ∫_a^b (1 − cos u) u^{−1−α} du for 0 ≤ a < b ≤ ∞.
pub fn stable_profile(alpha: f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    if b <= 1.0 {
        profile_head(alpha, b) - profile_head(alpha, a)
    } else if a >= 1.0 {
        profile_tail(alpha, a) - profile_tail(alpha, b)
    } else {
        let head_1 = profile_head(alpha, 1.0);
        let tail_1 = stable_constant(alpha) - head_1;
        head_1 - profile_head(alpha, a) + tail_1 - profile_tail(alpha, b)
    }
}

/// Outcome of the Hartman–Wintner growth heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HwCheck {
    pub pass: bool,
    /// ψ(ξ_max)/log ξ_max minus the threshold.
    pub margin: f64,
    pub increasing: bool,
}

/// ψ(ξ)/log ξ on 40 log-spaced points of [10, ξ_max] must increase and end
/// above `threshold`.
pub fn hartman_wintner_check(symbol: &LevySymbol, xi_max: f64, threshold: f64) -> Result<HwCheck> {
    if !(xi_max >= 1e3) {
        return Err(Error::InvalidParameter(format!(
            "xi_max must be at least 1e3, got {xi_max}"
        )));
    }
    let n = 40;
    let (lo, hi) = (10f64.ln(), xi_max.ln());
    let ratios: Vec<f64> = (0..n)
        .map(|i| {
            let l = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            symbol.eval(l.exp()) / l
        })
        .collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let margin = ratios[n - 1] - threshold;
    Ok(HwCheck {
        pass: increasing && margin > 0.0,
        margin,
        increasing,
    })
}

/// Uniform periodic grid on [−L, L) with 2^m points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub half_width: f64,
    pub m: u32,
}

impl Grid {
    pub fn new(half_width: f64, m: u32) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if !(2..=24).contains(&m) {
            return Err(Error::InvalidParameter(format!(
                "grid exponent must lie in 2..=24, got {m}"
            )));
        }
        Ok(Self { half_width, m })
    }

    pub fn len(&self) -> usize {
        1 << self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Signed frequency of FFT bin k.
    pub fn xi(&self, k: usize) -> f64 {
        let n = self.len();
        let s = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        PI * s / self.half_width
    }

    pub fn nyquist(&self) -> f64 {
        PI * (self.len() / 2) as f64 / self.half_width
    }
}

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                left: grid.len(),
                right: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRatio(*v));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    /// f(x) = amplitude · e^{−x²/(2s²)}.
    pub fn gaussian(grid: Grid, s: f64, amplitude: f64) -> Self {
        Self::from_fn(grid, |x| amplitude * (-0.5 * x * x / (s * s)).exp())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Riemann sum Σ g(f(x_j)) Δx.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let terms: Vec<f64> = self.values.iter().map(|v| g(*v)).collect();
        crate::stats::pairwise_sum(&terms) * self.grid.dx()
    }

    pub fn integral(&self) -> f64 {
        self.integrate_with(|v| v)
    }

    /// Σ |f| Δx over points with |x| > `radius`.
    pub fn mass_outside(&self, radius: f64) -> f64 {
        let dx = self.grid.dx();
        self.values
            .iter()
            .enumerate()
            .filter(|(j, _)| self.grid.x(*j).abs() > radius)
            .map(|(_, v)| v.abs() * dx)
            .sum()
    }

    /// Largest |f| within `cells` grid cells of the boundary ±L.
    pub fn boundary_level(&self, cells: usize) -> f64 {
        let n = self.values.len();
        let cells = cells.min(n / 2);
        self.values[..cells]
            .iter()
            .chain(&self.values[n - cells..])
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// FFT plans and symbol values for one (symbol, grid) pair.
#[derive(Clone)]
pub struct Spectral {
    pub grid: Grid,
    pub symbol: LevySymbol,
    xi: Vec<f64>,
    psi: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .field("symbol", &self.symbol)
            .finish_non_exhaustive()
    }
}

impl Spectral {
    pub fn new(symbol: &LevySymbol, grid: Grid) -> Result<Self> {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let xi: Vec<f64> = (0..n).map(|k| grid.xi(k)).collect();
        let psi: Vec<f64> = xi.iter().map(|x| symbol.eval(*x)).collect();
        if let Some(p) = psi.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::NonFiniteRatio(*p));
        }
        Ok(Self {
            grid,
            symbol: *symbol,
            xi,
            psi,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Unnormalised DFT of the samples.
    pub fn transform(&self, f: &GridFunction) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT including the 1/N factor.
    pub fn invert(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        for b in &mut buf {
            *b *= scale;
        }
        buf
    }

    fn nyquist_index(&self) -> usize {
        self.grid.len() / 2
    }

    /// Smallest m whose Nyquist frequency resolves e^{−tψ}.
    fn suggest_m(&self, t: f64) -> u32 {
        (self.grid.m + 1..=24)
            .find(|&m| {
                let nyq = PI * (1u64 << (m - 1)) as f64 / self.grid.half_width;
                (-t * self.symbol.eval(nyq)).exp() < RESOLUTION_TOL
            })
            .unwrap_or(self.grid.m + 1)
    }

    /// e^{−tψ(ξ_Nyquist)} < RESOLUTION_TOL.
    pub fn check_density_resolved(&self, t: f64) -> Result<()> {
        let residual = (-t * self.psi[self.nyquist_index()]).exp();
        if residual < RESOLUTION_TOL {
            Ok(())
        } else {
            Err(Error::UnresolvedSpectrum {
                t,
                residual,
                suggested_m: self.suggest_m(t),
            })
        }
    }

    /// |f̂ e^{−tψ}| at Nyquist relative to the largest coefficient of f̂.
    pub fn check_resolved(&self, f_hat: &[Complex64], t: f64) -> Result<()> {
        let peak = f_hat.iter().fold(0.0f64, |a, c| a.max(c.norm()));
        if peak == 0.0 {
            return Ok(());
        }
        let k = self.nyquist_index();
        let residual = f_hat[k].norm() * (-t * self.psi[k]).exp() / peak;
        if residual < RESOLUTION_TOL {
            Ok(())
        } else {
            Err(Error::UnresolvedSpectrum {
                t,
                residual,
                suggested_m: self.suggest_m(t).max(self.grid.m + 1),
            })
        }
    }

    /// f̂ · e^{−tψ}.
    pub fn propagate(&self, f_hat: &[Complex64], t: f64) -> Vec<Complex64> {
        f_hat
            .iter()
            .zip(&self.psi)
            .map(|(c, p)| c * (-t * p).exp())
            .collect()
    }

    /// Real part of the inverse transform of ĝ.
    pub fn values(&self, g_hat: Vec<Complex64>) -> Vec<f64> {
        self.invert(g_hat).into_iter().map(|c| c.re).collect()
    }

    /// Spectral derivative of the function with transform ĝ; the Nyquist
    /// mode has no real derivative and is dropped.
    pub fn derivative(&self, g_hat: &[Complex64]) -> Vec<f64> {
        let k_nyq = self.nyquist_index();
        let buf: Vec<Complex64> = g_hat
            .iter()
            .zip(&self.xi)
            .enumerate()
            .map(|(k, (c, x))| {
                if k == k_nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, *x)
                }
            })
            .collect();
        self.values(buf)
    }

    /// p_t on the grid, clamping rounding noise below zero.
    pub fn density(&self, t: f64) -> Result<GridFunction> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
        }
        self.check_density_resolved(t)?;
        let buf: Vec<Complex64> = self
            .psi
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * (-t * p).exp(), 0.0)
            })
            .collect();
        let mut values: Vec<f64> = self.invert(buf).into_iter().map(|c| c.re).collect();
        let scale = self.grid.len() as f64 / (2.0 * self.grid.half_width);
        for v in &mut values {
            *v *= scale;
            if *v < 0.0 {
                if *v < -NEGATIVE_CLAMP {
                    return Err(Error::NegativeDensity(*v));
                }
                *v = 0.0;
            }
        }
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    /// P_t f; P_0 f is f itself.
    pub fn apply(&self, f: &GridFunction, t: f64) -> Result<GridFunction> {
        self.check_grid(f)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
        }
        let f_hat = self.transform(f);
        self.check_resolved(&f_hat, t)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values(self.propagate(&f_hat, t)),
        })
    }

    /// ∂_x P_t f.
    pub fn gradient(&self, f: &GridFunction, t: f64) -> Result<GridFunction> {
        self.check_grid(f)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
        }
        let f_hat = self.transform(f);
        if t > 0.0 {
            self.check_resolved(&f_hat, t)?;
        }
        Ok(GridFunction {
            grid: self.grid,
            values: self.derivative(&self.propagate(&f_hat, t)),
        })
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::InvalidParameter(
                "function lives on a different grid".into(),
            ));
        }
        Ok(())
    }
}

/// p_t on `grid`, after the Hartman–Wintner heuristic at ξ_max = 1e3.
pub fn transition_density(symbol: &LevySymbol, t: f64, grid: Grid) -> Result<GridFunction> {
    let hw = hartman_wintner_check(symbol, 1e3, HW_THRESHOLD)?;
    if !hw.pass {
        return Err(Error::HartmanWintner { margin: hw.margin });
    }
    Spectral::new(symbol, grid)?.density(t)
}

pub fn apply_semigroup(f: &GridFunction, symbol: &LevySymbol, t: f64) -> Result<GridFunction> {
    Spectral::new(symbol, f.grid)?.apply(f, t)
}

pub fn semigroup_gradient(f: &GridFunction, symbol: &LevySymbol, t: f64) -> Result<GridFunction> {
    Spectral::new(symbol, f.grid)?.gradient(f, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::YoungFunction;
    use crate::orlicz::{luxemburg_norm, DiscreteMeasure, WeightedSample};

    fn grid() -> Grid {
        Grid::new(40.0, 12).unwrap()
    }

    fn stable(eps: f64, z_max: Option<f64>) -> LevySymbol {
        LevySymbol::new(
            0.0,
            JumpPart::TruncatedStable {
                alpha: 1.5,
                c: 1.0,
                eps,
                z_max,
            },
        )
        .unwrap()
    }

    fn mixed() -> LevySymbol {
        LevySymbol::new(
            1.0,
            JumpPart::CompoundPoisson {
                intensity: 1.0,
                law: JumpLaw::TwoPoint { a: 1.0 },
            },
        )
        .unwrap()
    }

    /// Brute-force ∫_a^b (1 − cos u)u^{−1−α} on a fine composite rule.
    fn brute_profile(alpha: f64, a: f64, b: f64) -> f64 {
        let gl = GaussLegendre::new(20);
        // geometric panels near zero, unit panels beyond one
        let mut total = 0.0;
        let mut lo = a.max(1e-12);
        if lo < 1.0 {
            let mut edges = vec![lo];
            while *edges.last().unwrap() < b.min(1.0) {
                let next = (edges.last().unwrap() * 1.5).min(b.min(1.0));
                edges.push(next);
            }
            for w in edges.windows(2) {
                total += gl.integrate(w[0], w[1], |u| (1.0 - u.cos()) * u.powf(-1.0 - alpha));
            }
            lo = 1.0;
        }
        if b > lo {
            let panels = ((b - lo) * 2.0).ceil() as usize;
            total += gl.composite(lo, b, panels, |u| (1.0 - u.cos()) * u.powf(-1.0 - alpha));
        }
        total
    }

    #[test]
    fn closed_form_symbols() {
        let s = LevySymbol::gaussian(2.0);
        assert_eq!(s.eval(3.0), 9.0);
        assert_eq!(s.eval(0.0), 0.0);
        let cp = |law| LevySymbol::new(0.0, JumpPart::CompoundPoisson { intensity: 2.0, law }).unwrap();
        let two = cp(JumpLaw::TwoPoint { a: 1.0 });
        assert!((two.eval(PI) - 4.0).abs() < 1e-15);
        let uni = cp(JumpLaw::Uniform { a: 2.0 });
        assert!((uni.eval(PI / 2.0) - 2.0).abs() < 1e-15);
        let gau = cp(JumpLaw::Gaussian { s: 1.0 });
        assert!((gau.eval(2.0) - 2.0 * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        for s in [two, uni, gau, stable(1e-3, Some(10.0)), mixed()] {
            for xi in [0.3, 1.0, 7.5, 120.0] {
                assert_eq!(s.eval(xi), s.eval(-xi));
                assert!(s.eval(xi) >= 0.0);
            }
        }
    }

    #[test]
    fn stable_constant_matches_quadrature() {
        for alpha in [0.5, 1.0, 1.5, 1.9] {
            let closed = stable_constant(alpha);
            let numeric = profile_head(alpha, 1.0) + profile_tail(alpha, 1.0);
            assert!((closed - numeric).abs() < 1e-10 * closed, "α={alpha}");
        }
        assert!((stable_constant(1.0 + 1e-6) - PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn untruncated_stable_is_a_power() {
        let s = stable(0.0, None);
        let a = 2.0 * stable_constant(1.5);
        for xi in [0.1f64, 1.0, 17.0, 400.0] {
            let exact = a * xi.powf(1.5);
            assert!((s.eval(xi) - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn truncated_stable_against_brute_force() {
        for (eps, zmax) in [(1e-3, 10.0), (0.05, 3.0)] {
            let s = stable(eps, Some(zmax));
            for xi in [0.5f64, 3.0, 40.0, 150.0] {
                let brute = 2.0 * xi.powf(1.5) * brute_profile(1.5, xi * eps, xi * zmax);
                let got = s.eval(xi);
                assert!((got - brute).abs() < 1e-9 * brute, "ξ={xi}: {got} vs {brute}");
            }
        }
    }

    #[test]
    fn hartman_wintner_examples() {
        assert!(hartman_wintner_check(&LevySymbol::gaussian(0.5), 1e4, HW_THRESHOLD).unwrap().pass);
        let cp = LevySymbol::new(
            0.0,
            JumpPart::CompoundPoisson {
                intensity: 3.0,
                law: JumpLaw::TwoPoint { a: 1.0 },
            },
        )
        .unwrap();
        let r = hartman_wintner_check(&cp, 1e4, HW_THRESHOLD).unwrap();
        assert!(!r.pass && r.margin < 0.0);
        assert!(hartman_wintner_check(&stable(0.0, None), 1e4, HW_THRESHOLD).unwrap().pass);
        assert!(hartman_wintner_check(&cp, 10.0, HW_THRESHOLD).is_err());
        assert!(matches!(
            transition_density(&cp, 1.0, grid()),
            Err(Error::HartmanWintner { .. })
        ));
    }

    #[test]
    fn heat_kernel_at_origin() {
        let p = transition_density(&LevySymbol::gaussian(2.0), 1.0, grid()).unwrap();
        let centre = p.values[grid().len() / 2];
        assert!((centre - (4.0 * PI).powf(-0.5)).abs() < 1e-8);
        assert!((p.integral() - 1.0).abs() < 1e-8);
        assert!(p.mass_outside(20.0) < 1e-10);
    }

    #[test]
    fn densities_have_unit_mass_and_symmetry() {
        for s in [LevySymbol::gaussian(2.0), mixed(), stable(0.0, None)] {
            let p = transition_density(&s, 0.7, grid()).unwrap();
            assert!((p.integral() - 1.0).abs() < 1e-8);
            let n = grid().len();
            for j in 1..n {
                assert!((p.values[j] - p.values[n - j]).abs() < 1e-12);
            }
            assert!(p.values.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn chapman_kolmogorov_by_direct_sum() {
        let g = Grid::new(20.0, 10).unwrap();
        let n = g.len();
        for sym in [LevySymbol::gaussian(2.0), mixed(), stable(0.0, None)] {
            let sp = Spectral::new(&sym, g).unwrap();
            let (s, t) = (0.4, 0.7);
            let ps = sp.density(s).unwrap();
            let pt = sp.density(t).unwrap();
            let pst = sp.density(s + t).unwrap();
            let dx = g.dx();
            for i in (0..n).step_by(17) {
                let conv: f64 = (0..n)
                    .map(|j| ps.values[j] * pt.values[(i + n + n / 2 - j) % n])
                    .sum::<f64>()
                    * dx;
                assert!((conv - pst.values[i]).abs() < 1e-8, "{sym:?} at {i}");
            }
        }
    }

    #[test]
    fn unresolved_spectrum_suggests_finer_grid() {
        let coarse = Grid::new(40.0, 8).unwrap();
        match Spectral::new(&LevySymbol::gaussian(2.0), coarse).unwrap().density(1e-3) {
            Err(Error::UnresolvedSpectrum { suggested_m, .. }) => {
                assert!(suggested_m > 8);
                let fine = Grid::new(40.0, suggested_m).unwrap();
                assert!(Spectral::new(&LevySymbol::gaussian(2.0), fine)
                    .unwrap()
                    .density(1e-3)
                    .is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaussian_convolution_oracle() {
        let sigma2 = 2.0;
        let sp = Spectral::new(&LevySymbol::gaussian(sigma2), grid()).unwrap();
        let f = GridFunction::gaussian(grid(), 1.0, 1.0);
        assert_eq!(sp.apply(&f, 0.0).unwrap(), f);
        for t in [0.1, 1.0, 3.0] {
            let u = sp.apply(&f, t).unwrap();
            let du = sp.gradient(&f, t).unwrap();
            let v = 1.0 + sigma2 * t;
            for (j, x) in grid().points().iter().enumerate() {
                let exact = (-x * x / (2.0 * v)).exp() / v.sqrt();
                assert!((u.values[j] - exact).abs() < 1e-8);
                assert!((du.values[j] + x / v * exact).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn gradient_parity_and_constants() {
        let sp = Spectral::new(&mixed(), grid()).unwrap();
        let f = GridFunction::gaussian(grid(), 1.5, 2.0);
        let d = sp.gradient(&f, 0.5).unwrap();
        let n = grid().len();
        for j in 1..n {
            assert!((d.values[j] + d.values[n - j]).abs() < 1e-10);
        }
        let c = GridFunction::from_fn(grid(), |_| 3.0);
        assert!(sp.gradient(&c, 0.5).unwrap().values.iter().all(|v| v.abs() < 1e-12));
        assert!((sp.apply(&c, 0.5).unwrap().values[7] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn phi_mass_decays() {
        let sq = YoungFunction::power(2.0).unwrap();
        for sym in [LevySymbol::gaussian(2.0), mixed()] {
            let sp = Spectral::new(&sym, grid()).unwrap();
            let f = GridFunction::gaussian(grid(), 1.0, 1.0);
            let mass: Vec<f64> = [0.0, 0.1, 1.0, 10.0]
                .iter()
                .map(|t| sp.apply(&f, *t).unwrap().integrate_with(|v| sq.eval(v)))
                .collect();
            assert!(mass.windows(2).all(|w| w[1] < w[0]), "{mass:?}");
        }
    }

    #[test]
    fn time_derivative_by_finite_differences() {
        let f = GridFunction::gaussian(grid(), 1.0, 1.0);
        let (t, h) = (0.5, 1e-3);
        // heat semigroup with σ² = 2 solves ∂ₜu = u″
        let sp = Spectral::new(&LevySymbol::gaussian(2.0), grid()).unwrap();
        let (lo, hi) = (sp.apply(&f, t - h).unwrap(), sp.apply(&f, t + h).unwrap());
        let du = sp.gradient(&f, t).unwrap();
        let d2u = sp.gradient(&du, 0.0).unwrap();
        for j in 0..grid().len() {
            let dt = (hi.values[j] - lo.values[j]) / (2.0 * h);
            assert!((dt - d2u.values[j]).abs() < 1e-6, "{j}: {dt} vs {}", d2u.values[j]);
        }
        // second differences in t stay bounded for a jump symbol
        let sp = Spectral::new(&mixed(), grid()).unwrap();
        let mid = sp.apply(&f, t).unwrap();
        for h in [1e-2, 5e-3] {
            let (lo, hi) = (sp.apply(&f, t - h).unwrap(), sp.apply(&f, t + h).unwrap());
            let worst = (0..grid().len())
                .map(|j| ((hi.values[j] - 2.0 * mid.values[j] + lo.values[j]) / (h * h)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 2.0, "{worst}");
        }
    }

    fn norm(f: &GridFunction, phi: &YoungFunction) -> f64 {
        let mu = DiscreteMeasure::from_weights(vec![f.grid.dx(); f.grid.len()]).unwrap();
        luxemburg_norm(&WeightedSample::new(f.values.clone()), &mu, phi, 1e-12).unwrap()
    }

    #[test]
    fn luxemburg_contraction_and_maximal_inequality() {
        let f = GridFunction::from_fn(grid(), |x| (-(x - 1.0).powi(2)).exp() - 0.5 * (-(x + 2.0).powi(2) / 3.0).exp());
        for sym in [LevySymbol::gaussian(2.0), mixed(), stable(0.0, None)] {
            let sp = Spectral::new(&sym, grid()).unwrap();
            for phi in [YoungFunction::power(2.0).unwrap(), YoungFunction::power(3.0).unwrap()] {
                let nf = norm(&f, &phi);
                let times = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];
                let mut sup = vec![0.0f64; grid().len()];
                for t in times {
                    let u = sp.apply(&f, t).unwrap();
                    if t == 0.1 || t == 1.0 {
                        assert!(norm(&u, &phi) <= nf * (1.0 + 1e-10));
                    }
                    for (s, v) in sup.iter_mut().zip(&u.values) {
                        *s = s.max(v.abs());
                    }
                }
                let c = phi.indices().unwrap().doob_constant().unwrap();
                let sup = GridFunction::new(grid(), sup).unwrap();
                assert!(norm(&sup, &phi) <= c * nf);
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(1.0, 30).is_err());
        let g = Grid::new(1.0, 3).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 7]).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 8]).is_err());
        assert_eq!(g.points()[4], 0.0);
        assert_eq!(g.xi(5), -3.0 * PI);
    }
}
