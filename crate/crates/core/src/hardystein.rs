//! Hardy–Stein identities.
//!
//! Parabolic form at finite horizon T:
//!
//! ∫φ(f) = ∫_0^T ∫ [½σ²φ″(P_tf)(∂P_tf)² + ∫F_φ(P_tf(y), P_tf(y+z))ν(dz)] dy dt + ∫φ(P_Tf),
//!
//! checked by spectral quadrature and by Monte-Carlo along the martingale
//! M_s = P_{T−s}f(Z_s). Elliptic form for Brownian motion on an interval with
//! affine u, where exit law and Green function are explicit.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::convex::YoungFunction;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::paths::{simulate_indexed, stream_rng, JumpLaw, JumpPart, LevyModel, SimSpec};
use crate::quad::{geometric_panels, GaussLegendre};
use crate::semigroup::{hartman_wintner_check, GridFunction, LevySymbol, Spectral, HW_THRESHOLD};
use crate::stats::{pairwise_sum, MeanEstimate};
use crate::verify::{IdentityReport, Verdict};

/// Grid cells next to ±L that must be free of f-mass.
pub const BOUNDARY_CELLS: usize = 10;
const BOUNDARY_LEVEL: f64 = 1e-10;

/// Discretisation of ν for the jump term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZRuleSpec {
    /// Inner cutoff δ of truncated-stable measures; below it the integrand is
    /// replaced by ½φ″(u)u′²z².
    pub delta: f64,
    /// Gauss–Legendre nodes per z-panel.
    pub nodes: usize,
    /// Width of the uniform panels (relative to the law's scale for
    /// Gaussian jumps).
    pub panel_width: f64,
}

impl Default for ZRuleSpec {
    fn default() -> Self {
        Self {
            delta: 1.0 / 32.0,
            nodes: 8,
            panel_width: 0.5,
        }
    }
}

/// Symmetric quadrature for ν: each `(z, w)` stands for mass w at +z and
/// at −z. `taylor_mass` is ∫_{|z|<δ} z² ν(dz).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRule {
    pub nodes: Vec<(f64, f64)>,
    pub taylor_mass: f64,
}

impl JumpRule {
    pub fn new(jumps: &JumpPart, spec: &ZRuleSpec) -> Result<Self> {
        if !(spec.delta > 0.0 && spec.panel_width > 0.0 && spec.nodes >= 1) {
            return Err(Error::InvalidParameter(format!("invalid z-rule {spec:?}")));
        }
        let gl = GaussLegendre::new(spec.nodes);
        let mut nodes = Vec::new();
        let mut push_panels = |lo: f64, hi: f64, width: f64, density: &dyn Fn(f64) -> f64| {
            let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
            let h = (hi - lo) / panels as f64;
            for k in 0..panels {
                let a = lo + k as f64 * h;
                let b = if k + 1 == panels { hi } else { a + h };
                for (z, w) in gl.mapped(a, b) {
                    nodes.push((z, w * density(z)));
                }
            }
        };
        let mut taylor_mass = 0.0;
        match *jumps {
            JumpPart::None => {}
            JumpPart::CompoundPoisson { intensity, law } => match law {
                JumpLaw::TwoPoint { a } => nodes.push((a, 0.5 * intensity)),
                JumpLaw::Uniform { a } => {
                    push_panels(0.0, a, spec.panel_width, &|_| intensity / (2.0 * a))
                }
                JumpLaw::Gaussian { s } => {
                    let norm = intensity / (s * (2.0 * std::f64::consts::PI).sqrt());
                    push_panels(0.0, 10.0 * s, spec.panel_width * s, &|z| {
                        norm * (-0.5 * z * z / (s * s)).exp()
                    })
                }
            },
            JumpPart::TruncatedStable {
                alpha,
                c,
                eps,
                z_max,
            } => {
                let z_max = z_max.ok_or_else(|| {
                    Error::InvalidParameter("the jump term needs a finite z_max".into())
                })?;
                let lo = eps.max(spec.delta);
                if eps < spec.delta {
                    let d = spec.delta.min(z_max);
                    taylor_mass =
                        2.0 * c * (d.powf(2.0 - alpha) - eps.powf(2.0 - alpha)) / (2.0 - alpha);
                }
                let density = |z: f64| c * z.powf(-1.0 - alpha);
                let mut a = lo;
                let knee = 1.0f64.min(z_max);
                while a < knee {
                    let b = (2.0 * a).min(knee);
                    push_panels(a, b, b - a, &density);
                    a = b;
                }
                if z_max > a {
                    push_panels(a, z_max, spec.panel_width, &density);
                }
            }
        }
        Ok(Self { nodes, taylor_mass })
    }

    /// Largest |z| the rule touches.
    pub fn reach(&self) -> f64 {
        self.nodes.iter().fold(0.0, |a, (z, _)| a.max(*z))
    }
}

/// Knobs of the parabolic quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParabolicConfig {
    pub horizon: f64,
    /// Geometric levels K: panels [T2^{−k−1}, T2^{−k}] for k = 0..K plus
    /// [0, T2^{−K−1}].
    pub levels: usize,
    /// Gauss–Legendre nodes per time panel.
    pub time_nodes: usize,
    pub z: ZRuleSpec,
    /// Verdict threshold on the relative accounting error.
    pub tolerance: f64,
    pub exec: Execution,
}

impl Default for ParabolicConfig {
    fn default() -> Self {
        Self {
            horizon: 8.0,
            levels: 14,
            time_nodes: 8,
            z: ZRuleSpec::default(),
            tolerance: 1e-3,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolicReport {
    pub lhs: f64,
    pub rhs_diffusion: f64,
    pub rhs_jump: f64,
    pub rhs_tail: f64,
    /// lhs − (rhs_diffusion + rhs_jump).
    pub residual: f64,
    pub relative_residual: f64,
    /// |lhs − (rhs_diffusion + rhs_jump + rhs_tail)| / |lhs|.
    pub accounting_error: f64,
    /// Diffusion term through p(p−1)|u|^{p−2} for power φ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_diffusion_power: Option<f64>,
    pub time_nodes: usize,
    pub z_nodes: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
}

fn relative(x: f64, scale: f64) -> f64 {
    x.abs() / scale.abs().max(1e-300)
}

/// Spatial integrands of the three rhs pieces at one time t.
struct Slice {
    diffusion: f64,
    diffusion_power: f64,
    jump: f64,
}

fn slice_terms(
    sp: &Spectral,
    f_hat: &[Complex64],
    t: f64,
    phi: &YoungFunction,
    rule: &JumpRule,
) -> Result<Slice> {
    sp.check_resolved(f_hat, t)?;
    let dx = sp.grid.dx();
    let u_hat = sp.propagate(f_hat, t);
    let u = sp.values(u_hat.clone());
    let du = sp.derivative(&u_hat);
    let power = phi.power_exponent();
    let needs_curv = sp.symbol.sigma2 > 0.0 || rule.taylor_mass > 0.0;
    let mut curv_sq = Vec::with_capacity(u.len());
    let mut power_sq = Vec::with_capacity(u.len());
    if needs_curv {
        for (v, d) in u.iter().zip(&du) {
            curv_sq.push(phi.second_deriv(*v)? * d * d);
            if let Some(p) = power {
                power_sq.push(p * (p - 1.0) * v.abs().powf(p - 2.0) * d * d);
            }
        }
    }
    let curv_int = pairwise_sum(&curv_sq) * dx;
    let half_rate = 0.5 * sp.symbol.sigma2;
    let diffusion = half_rate * curv_int;
    let diffusion_power = half_rate * pairwise_sum(&power_sq) * dx;

    let mut jump_parts = Vec::with_capacity(rule.nodes.len() + 1);
    jump_parts.push(0.5 * rule.taylor_mass * curv_int);
    let k_nyq = u_hat.len() / 2;
    for &(z, w) in &rule.nodes {
        let buf: Vec<Complex64> = u_hat
            .iter()
            .zip(sp.xi())
            .enumerate()
            .map(|(k, (c, xi))| {
                if k == k_nyq {
                    c * (xi * z).cos() * Complex64::new(1.0, 1.0)
                } else {
                    let plus = Complex64::from_polar(1.0, xi * z);
                    c * (plus + Complex64::i() * plus.conj())
                }
            })
            .collect();
        let shifted = sp.invert(buf);
        let terms: Vec<f64> = u
            .iter()
            .zip(&shifted)
            .map(|(a, s)| phi.divergence(*a, s.re) + phi.divergence(*a, s.im))
            .collect();
        jump_parts.push(w * pairwise_sum(&terms) * dx);
    }
    Ok(Slice {
        diffusion,
        diffusion_power,
        jump: pairwise_sum(&jump_parts),
    })
}

/// Spectral quadrature of the finite-horizon parabolic identity.
pub fn parabolic_identity(
    f: &GridFunction,
    symbol: &LevySymbol,
    phi: &YoungFunction,
    cfg: &ParabolicConfig,
) -> Result<ParabolicReport> {
    if !(cfg.horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {}",
            cfg.horizon
        )));
    }
    if symbol.sigma2 > 0.0 && !phi.has_second_deriv() {
        return Err(Error::MissingSecondDerivative);
    }
    let hw = hartman_wintner_check(symbol, 1e3, HW_THRESHOLD)?;
    if !hw.pass {
        return Err(Error::HartmanWintner { margin: hw.margin });
    }
    let edge = f.boundary_level(BOUNDARY_CELLS);
    if edge > BOUNDARY_LEVEL {
        return Err(Error::BoundaryMass(edge));
    }
    let rule = JumpRule::new(&symbol.jumps, &cfg.z)?;
    if rule.taylor_mass > 0.0 && !phi.has_second_deriv() {
        return Err(Error::MissingSecondDerivative);
    }
    if rule.reach() >= f.grid.half_width {
        return Err(Error::InvalidParameter(format!(
            "jump reach {} exceeds the grid half-width {}",
            rule.reach(),
            f.grid.half_width
        )));
    }
    let sp = Spectral::new(symbol, f.grid)?;
    let f_hat = sp.transform(f);

    let gl = GaussLegendre::new(cfg.time_nodes.max(1));
    let nodes: Vec<(f64, f64)> = geometric_panels(cfg.horizon, cfg.levels)
        .into_iter()
        .flat_map(|(a, b)| gl.mapped(a, b).collect::<Vec<_>>())
        .collect();
    let slices: Vec<Result<Slice>> = cfg
        .exec
        .map(nodes.len(), |i| slice_terms(&sp, &f_hat, nodes[i].0, phi, &rule));
    let mut diff = Vec::with_capacity(nodes.len());
    let mut diff_pow = Vec::with_capacity(nodes.len());
    let mut jump = Vec::with_capacity(nodes.len());
    for (s, (_, w)) in slices.into_iter().zip(&nodes) {
        let s = s?;
        diff.push(w * s.diffusion);
        diff_pow.push(w * s.diffusion_power);
        jump.push(w * s.jump);
    }
    let lhs = f.integrate_with(|v| phi.eval(v));
    let at_t = sp.apply(f, cfg.horizon)?;
    let rhs_tail = at_t.integrate_with(|v| phi.eval(v));
    let rhs_diffusion = pairwise_sum(&diff);
    let rhs_jump = pairwise_sum(&jump);
    let residual = lhs - (rhs_diffusion + rhs_jump);
    let accounting_error = relative(residual - rhs_tail, lhs);
    Ok(ParabolicReport {
        lhs,
        rhs_diffusion,
        rhs_jump,
        rhs_tail,
        residual,
        relative_residual: relative(residual, lhs),
        accounting_error,
        rhs_diffusion_power: phi.power_exponent().map(|_| pairwise_sum(&diff_pow)),
        time_nodes: nodes.len(),
        z_nodes: rule.nodes.len(),
        tolerance: cfg.tolerance,
        verdict: Verdict::from_bool(accounting_error <= cfg.tolerance),
    })
}

/// Knobs of the Monte-Carlo route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McParabolicConfig {
    pub horizon: f64,
    /// Time steps of the simulation grid; semigroup slices sit on it.
    pub steps: usize,
    /// Starting points x₀ are the midpoints of `starts` cells of [−R, R].
    pub radius: f64,
    pub starts: usize,
    pub paths: usize,
    pub seed: u64,
    pub z: ZRuleSpec,
    pub exec: Execution,
}

impl McParabolicConfig {
    pub fn new(horizon: f64, paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            steps: 64,
            radius: 8.0,
            starts: 64,
            paths,
            seed,
            z: ZRuleSpec::default(),
            exec: Execution::default(),
        }
    }
}

/// P_{T−s}f and its gradient on the simulation time grid.
struct SliceTable {
    dt: f64,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    x0: f64,
    dx: f64,
    half_width: f64,
}

impl SliceTable {
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let pos = (x - self.x0) / self.dx;
        let n = self.values[0].len();
        if !(pos >= 0.0 && pos < (n - 1) as f64) {
            return Err(Error::OutsideGrid {
                x,
                half_width: self.half_width,
            });
        }
        let j = pos.floor() as usize;
        Ok((j, pos - j as f64))
    }

    /// (P_{T−s}f(x), ∂P_{T−s}f(x)) by bilinear interpolation.
    fn eval(&self, s: f64, x: f64) -> Result<(f64, f64)> {
        let (j, fx) = self.locate(x)?;
        let last = self.values.len() - 1;
        let pos = (s / self.dt).clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        let ft = if last == 0 { 0.0 } else { pos - i as f64 };
        let i2 = (i + 1).min(last);
        let lerp = |tab: &Vec<Vec<f64>>| {
            let a = tab[i][j] + fx * (tab[i][j + 1] - tab[i][j]);
            let b = tab[i2][j] + fx * (tab[i2][j + 1] - tab[i2][j]);
            a + ft * (b - a)
        };
        Ok((lerp(&self.values), lerp(&self.grads)))
    }
}

/// ∫φ(f) against ∫E_x V^φ(M)_T dx, where V^φ(M)_T = φ(P_Tf(x)) plus the
/// diffusion integral and the jump compensator along the simulated path.
/// The x-integral is a midpoint rule on [−R, R]; the mass of
/// x ↦ E_xφ(f(Z_T)) outside [−R, R] is computed spectrally and folded into
/// the grid allowance together with the change from halving the time grid.
pub fn mc_parabolic(
    f: &GridFunction,
    model: &LevyModel,
    phi: &YoungFunction,
    cfg: &McParabolicConfig,
) -> Result<IdentityReport> {
    if !matches!(model.jumps, JumpPart::None | JumpPart::CompoundPoisson { .. }) {
        return Err(Error::InvalidParameter(
            "the Monte-Carlo route needs a finite-activity model".into(),
        ));
    }
    if cfg.paths < 2 || cfg.starts == 0 || cfg.steps == 0 || !(cfg.radius > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid Monte-Carlo knobs {cfg:?}")));
    }
    if model.sigma2 > 0.0 && !phi.has_second_deriv() {
        return Err(Error::MissingSecondDerivative);
    }
    let symbol = LevySymbol::from_model(model)?;
    let sp = Spectral::new(&symbol, f.grid)?;
    let rule = JumpRule::new(&model.jumps, &cfg.z)?;
    let f_hat = sp.transform(f);
    let dt = cfg.horizon / cfg.steps as f64;
    let mut values = Vec::with_capacity(cfg.steps + 1);
    let mut grads = Vec::with_capacity(cfg.steps + 1);
    for j in 0..=cfg.steps {
        // slice j sits at time s_j = jΔt and holds P_{T−s_j} f
        let tau = cfg.horizon - j as f64 * dt;
        let tau = if j == cfg.steps { 0.0 } else { tau };
        if tau > 0.0 {
            sp.check_resolved(&f_hat, tau)?;
        }
        let u_hat = sp.propagate(&f_hat, tau);
        values.push(sp.values(u_hat.clone()));
        grads.push(sp.derivative(&u_hat));
    }
    let table = SliceTable {
        dt,
        values,
        grads,
        x0: f.grid.x(0),
        dx: f.grid.dx(),
        half_width: f.grid.half_width,
    };

    let half_rate = 0.5 * model.sigma2;
    let integrand = |s: f64, z0: f64| -> Result<f64> {
        let (u, du) = table.eval(s, z0)?;
        let mut total = 0.0;
        if half_rate > 0.0 {
            total += half_rate * phi.second_deriv(u)? * du * du;
        }
        for &(z, w) in &rule.nodes {
            let (up, _) = table.eval(s, z0 + z)?;
            let (um, _) = table.eval(s, z0 - z)?;
            total += w * (phi.divergence(u, up) + phi.divergence(u, um));
        }
        Ok(total)
    };

    let width = 2.0 * cfg.radius;
    let cell = width / cfg.starts as f64;
    let spec = SimSpec::new(cfg.horizon, cfg.steps);
    let samples: Vec<Result<(f64, f64, f64)>> = cfg.exec.map(cfg.paths, |i| {
        let x0 = -cfg.radius + ((i % cfg.starts) as f64 + 0.5) * cell;
        let path = simulate_indexed(model, &spec.with_x0(x0), cfg.seed, i as u64)?;
        let (m0, _) = table.eval(0.0, x0)?;
        let start = phi.eval(m0);
        // trapezoid over consecutive nodes, with the left limit at the right end
        let mut fine = 0.0;
        let mut prev = integrand(path.times[0], path.values[0])?;
        let mut coarse_nodes = vec![(path.times[0], prev)];
        for k in 1..path.len() {
            let h = path.times[k] - path.times[k - 1];
            let at_left = integrand(path.times[k], path.left[k])?;
            fine += 0.5 * h * (prev + at_left);
            prev = if path.is_jump[k] {
                integrand(path.times[k], path.values[k])?
            } else {
                at_left
            };
            let f_idx = path.fine_index[k];
            if path.is_jump[k] || f_idx % 2 == 0 || k + 1 == path.len() {
                coarse_nodes.push((path.times[k], at_left));
                if path.is_jump[k] {
                    coarse_nodes.push((path.times[k], prev));
                }
            }
        }
        let coarse: f64 = coarse_nodes
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum();
        let terminal = phi.eval(table.eval(cfg.horizon, path.terminal())?.0);
        Ok((width * terminal, width * (start + fine), width * (start + coarse)))
    });
    let mut lhs_mc = Vec::with_capacity(cfg.paths);
    let mut rhs = Vec::with_capacity(cfg.paths);
    let mut rhs_coarse = Vec::with_capacity(cfg.paths);
    for s in samples {
        let (a, b, c) = s?;
        lhs_mc.push(a);
        rhs.push(b);
        rhs_coarse.push(c);
    }
    let lhs = f.integrate_with(|v| phi.eval(v));
    let phi_f = GridFunction::from_fn(f.grid, |_| 0.0);
    let phi_f = GridFunction {
        values: f.values.iter().map(|v| phi.eval(*v)).collect(),
        ..phi_f
    };
    let spread = sp.apply(&phi_f, cfg.horizon)?;
    let outside = spread.mass_outside(cfg.radius);
    let r = MeanEstimate::from_samples(&rhs);
    let l = MeanEstimate::from_samples(&lhs_mc);
    let coarse = MeanEstimate::from_samples(&rhs_coarse);
    let mut rep = IdentityReport::exact(lhs, r.mean, 0.0);
    rep.n_samples = Some(cfg.paths);
    rep.stderr = Some(r.stderr);
    rep.lhs_stderr = Some(l.stderr);
    rep.rhs_stderr = Some(r.stderr);
    rep.grid_allowance = Some((r.mean - coarse.mean).abs() + outside);
    let slack = 3.0 * r.stderr + rep.grid_allowance.unwrap();
    rep.verdict = Verdict::from_bool(rep.abs_err <= slack);
    Ok(rep)
}

/// Affine u(x) = a·x + b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
}

impl Affine {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

fn check_interval(x: f64, interval: (f64, f64), sigma2: f64) -> Result<()> {
    let (l, r) = interval;
    if !(l < r) {
        return Err(Error::InvalidParameter(format!("empty interval ({l}, {r})")));
    }
    if !(x > l && x < r) {
        return Err(Error::OutsideInterval { x, left: l, right: r });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    Ok(())
}

fn exit_expectation(u: Affine, phi: &YoungFunction, interval: (f64, f64), x: f64) -> f64 {
    let (l, r) = interval;
    ((r - x) * phi.eval(u.eval(l)) + (x - l) * phi.eval(u.eval(r))) / (r - l)
}

/// E_xφ(u(Z_τ)) = φ(u(x)) + ∫G(x,y)·½σ²φ″(u(y))a² dy for Brownian motion
/// with variance rate σ² on (l, r), G(x,y) = (2/σ²)(x∧y − l)(r − x∨y)/(r − l).
pub fn elliptic_identity_bm(
    u: Affine,
    phi: &YoungFunction,
    interval: (f64, f64),
    x: f64,
    sigma2: f64,
    tol: f64,
) -> Result<IdentityReport> {
    check_interval(x, interval, sigma2)?;
    let (l, r) = interval;
    let lhs = exit_expectation(u, phi, interval, x);
    let mut rhs = phi.eval(u.eval(x));
    if u.a != 0.0 {
        let gl = GaussLegendre::new(32);
        let kernel = |y: f64| (x.min(y) - l) * (r - x.max(y)) / (r - l);
        let mut err = None;
        let mut integrand = |y: f64| match phi.second_deriv(u.eval(y)) {
            Ok(c) => kernel(y) * c,
            Err(e) => {
                err = Some(e);
                0.0
            }
        };
        // break at x (kernel kink) and at the zero of u (where φ″ may kink)
        let mut edges = vec![l, x, r];
        let root = -u.b / u.a;
        if root > l && root < r && root != x {
            edges.push(root);
        }
        edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut total = 0.0;
        for e in edges.windows(2) {
            for (y, w) in gl.mapped(e[0], e[1]).collect::<Vec<_>>() {
                total += w * integrand(y);
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        // G·½σ² = kernel, so σ² drops out
        rhs += u.a * u.a * total;
    }
    Ok(IdentityReport::exact(lhs, rhs, tol))
}

/// Knobs of the exit-sampling cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitMcConfig {
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub exec: Execution,
}

/// Monte-Carlo E_xφ(u(Z_τ)) from the exit side of Euler-sampled Brownian
/// paths, against the exact exit expectation. The grid allowance bounds the
/// exit-side bias from overshoot at discrete monitoring.
pub fn elliptic_exit_mc(
    u: Affine,
    phi: &YoungFunction,
    interval: (f64, f64),
    x: f64,
    sigma2: f64,
    cfg: &ExitMcConfig,
) -> Result<IdentityReport> {
    check_interval(x, interval, sigma2)?;
    if !(cfg.dt > 0.0) || cfg.paths < 2 {
        return Err(Error::InvalidParameter(format!("invalid exit knobs {cfg:?}")));
    }
    let (l, r) = interval;
    let step = (sigma2 * cfg.dt).sqrt();
    let (phi_l, phi_r) = (phi.eval(u.eval(l)), phi.eval(u.eval(r)));
    let samples = cfg.exec.map(cfg.paths, |i| {
        let mut rng = stream_rng(cfg.seed, i as u64);
        let mut z = x;
        loop {
            let n: f64 = StandardNormal.sample(&mut rng);
            z += step * n;
            if z <= l {
                return phi_l;
            }
            if z >= r {
                return phi_r;
            }
        }
    });
    let est = MeanEstimate::from_samples(&samples);
    let exact = exit_expectation(u, phi, interval, x);
    // expected overshoot of a Gaussian walk is ≈ 0.5826·σ√Δt
    let allowance = 0.5826 * step / (r - l) * (phi_r - phi_l).abs();
    let mut rep = IdentityReport::exact(est.mean, exact, 0.0);
    rep.n_samples = Some(cfg.paths);
    rep.stderr = Some(est.stderr);
    rep.lhs_stderr = Some(est.stderr);
    rep.grid_allowance = Some(allowance);
    rep.verdict = Verdict::from_bool(rep.abs_err <= 3.0 * est.stderr + allowance);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::Grid;

    fn grid() -> Grid {
        Grid::new(40.0, 12).unwrap()
    }

    fn gauss() -> GridFunction {
        GridFunction::gaussian(grid(), 1.0, 1.0)
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

    #[test]
    fn gaussian_square_accounting() {
        let phi = YoungFunction::power(2.0).unwrap();
        let r = parabolic_identity(&gauss(), &LevySymbol::gaussian(2.0), &phi, &ParabolicConfig::default())
            .unwrap();
        assert!((r.lhs - std::f64::consts::PI.sqrt()).abs() < 1e-10);
        assert_eq!(r.rhs_jump, 0.0);
        assert!(r.accounting_error < 1e-3, "{r:?}");
        assert!(r.verdict.passed());
        // ∫(P_tf)² = √π/√(1+σ²t) in Fourier form
        let fourier_tail = (std::f64::consts::PI / (1.0 + 2.0 * 8.0)).sqrt();
        assert!((r.rhs_tail - fourier_tail).abs() < 1e-10);
        assert!((r.rhs_diffusion - (r.lhs - fourier_tail)).abs() < 1e-8);
    }

    #[test]
    fn cubic_routes_agree() {
        let phi = YoungFunction::power(3.0).unwrap();
        let r = parabolic_identity(&gauss(), &LevySymbol::gaussian(2.0), &phi, &ParabolicConfig::default())
            .unwrap();
        let pow = r.rhs_diffusion_power.unwrap();
        assert!((pow - r.rhs_diffusion).abs() < 1e-10 * r.rhs_diffusion);
        assert!(r.accounting_error < 1e-3, "{r:?}");
    }

    #[test]
    fn zero_function() {
        let phi = YoungFunction::power(2.0).unwrap();
        let z = GridFunction::zeros(grid());
        let r = parabolic_identity(&z, &mixed(), &phi, &ParabolicConfig::default()).unwrap();
        assert_eq!(
            (r.lhs, r.rhs_diffusion, r.rhs_jump, r.rhs_tail),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert!(r.verdict.passed());
    }

    #[test]
    fn mixed_model_accounting_and_scaling() {
        let phi = YoungFunction::power(2.0).unwrap();
        let cfg = ParabolicConfig::default();
        let r = parabolic_identity(&gauss(), &mixed(), &phi, &cfg).unwrap();
        assert!(r.accounting_error < 5e-3, "{r:?}");
        assert!(r.rhs_jump > 0.0 && r.rhs_diffusion > 0.0);
        let c = 2.5;
        let s = parabolic_identity(&gauss().scale(c), &mixed(), &phi, &cfg).unwrap();
        for (a, b) in [
            (r.lhs, s.lhs),
            (r.rhs_diffusion, s.rhs_diffusion),
            (r.rhs_jump, s.rhs_jump),
            (r.rhs_tail, s.rhs_tail),
        ] {
            assert!((b - c * c * a).abs() < 1e-10 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn tail_decreases_with_horizon() {
        let phi = YoungFunction::power(2.0).unwrap();
        let tails: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|t| {
                let cfg = ParabolicConfig {
                    horizon: *t,
                    levels: 12,
                    ..Default::default()
                };
                parabolic_identity(&gauss(), &mixed(), &phi, &cfg).unwrap().rhs_tail
            })
            .collect();
        assert!(tails.windows(2).all(|w| w[1] < w[0]), "{tails:?}");
    }

    #[test]
    fn rejects_mass_at_the_boundary() {
        let wide = GridFunction::gaussian(grid(), 20.0, 1.0);
        let phi = YoungFunction::power(2.0).unwrap();
        assert!(matches!(
            parabolic_identity(&wide, &mixed(), &phi, &ParabolicConfig::default()),
            Err(Error::BoundaryMass(_))
        ));
    }

    #[test]
    fn jump_rules() {
        let two = JumpRule::new(
            &JumpPart::CompoundPoisson {
                intensity: 3.0,
                law: JumpLaw::TwoPoint { a: 0.5 },
            },
            &ZRuleSpec::default(),
        )
        .unwrap();
        assert_eq!(two.nodes, vec![(0.5, 1.5)]);
        for law in [JumpLaw::Uniform { a: 1.3 }, JumpLaw::Gaussian { s: 0.7 }] {
            let rule = JumpRule::new(
                &JumpPart::CompoundPoisson { intensity: 2.0, law },
                &ZRuleSpec::default(),
            )
            .unwrap();
            let mass: f64 = rule.nodes.iter().map(|(_, w)| 2.0 * w).sum();
            assert!((mass - 2.0).abs() < 1e-10);
        }
        let st = JumpPart::TruncatedStable {
            alpha: 1.5,
            c: 1.0,
            eps: 1e-3,
            z_max: Some(10.0),
        };
        let rule = JumpRule::new(&st, &ZRuleSpec::default()).unwrap();
        let m2: f64 = rule.nodes.iter().map(|(z, w)| 2.0 * w * z * z).sum::<f64>() + rule.taylor_mass;
        assert!((m2 - st.second_moment_rate()).abs() < 1e-10 * m2);
        let unbounded = JumpPart::TruncatedStable {
            alpha: 1.5,
            c: 1.0,
            eps: 1e-3,
            z_max: None,
        };
        assert!(JumpRule::new(&unbounded, &ZRuleSpec::default()).is_err());
    }

    #[test]
    fn stable_model_accounting_and_z_refinement() {
        let sym = LevySymbol::new(
            0.0,
            JumpPart::TruncatedStable {
                alpha: 1.5,
                c: 1.0,
                eps: 1e-3,
                z_max: Some(10.0),
            },
        )
        .unwrap();
        let phi = YoungFunction::power(2.0).unwrap();
        let cfg = ParabolicConfig {
            levels: 10,
            ..Default::default()
        };
        let r = parabolic_identity(&gauss(), &sym, &phi, &cfg).unwrap();
        assert!(r.accounting_error < 1e-2, "{r:?}");
        let finer = ParabolicConfig {
            z: ZRuleSpec {
                delta: cfg.z.delta / 2.0,
                ..cfg.z
            },
            ..cfg
        };
        let s = parabolic_identity(&gauss(), &sym, &phi, &finer).unwrap();
        assert!((s.rhs_jump - r.rhs_jump).abs() < 1e-4 * r.rhs_jump);
    }

    #[test]
    fn execution_strategy_is_invisible() {
        let phi = YoungFunction::power(3.0).unwrap();
        let seq = ParabolicConfig {
            levels: 6,
            exec: Execution::Sequential,
            ..Default::default()
        };
        let par = ParabolicConfig {
            exec: Execution::Parallel,
            ..seq
        };
        assert_eq!(
            parabolic_identity(&gauss(), &mixed(), &phi, &seq).unwrap(),
            parabolic_identity(&gauss(), &mixed(), &phi, &par).unwrap()
        );
    }

    #[test]
    fn mc_parabolic_gaussian() {
        let phi = YoungFunction::power(2.0).unwrap();
        let cfg = McParabolicConfig::new(1.0, 4096, 3);
        let r = mc_parabolic(&gauss(), &LevyModel::brownian(2.0), &phi, &cfg).unwrap();
        assert!(r.verdict.passed(), "{r:?}");
    }

    #[test]
    fn mc_parabolic_two_point() {
        let phi = YoungFunction::power(2.0).unwrap();
        let m = LevyModel::compound_poisson(0.0, 1.0, JumpLaw::TwoPoint { a: 1.0 });
        let cfg = McParabolicConfig::new(1.0, 4096, 5);
        let r = mc_parabolic(&gauss(), &m, &phi, &cfg).unwrap();
        assert!(r.verdict.passed(), "{r:?}");
    }

    #[test]
    fn mc_parabolic_tiny_horizon() {
        let phi = YoungFunction::power(2.0).unwrap();
        let cfg = McParabolicConfig {
            steps: 4,
            starts: 512,
            ..McParabolicConfig::new(1e-4, 512, 1)
        };
        let r = mc_parabolic(&gauss(), &LevyModel::brownian(2.0), &phi, &cfg).unwrap();
        assert!(r.rel_err < 1e-3, "{r:?}");
    }

    #[test]
    fn elliptic_examples() {
        let id = Affine { a: 1.0, b: 0.0 };
        let sq = YoungFunction::power(2.0).unwrap();
        let r = elliptic_identity_bm(id, &sq, (0.0, 1.0), 0.5, 1.0, 1e-10).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-14 && (r.rhs - 0.5).abs() < 1e-12);
        assert!(r.verdict.passed());

        let q = YoungFunction::power(4.0).unwrap();
        let r = elliptic_identity_bm(id, &q, (0.0, 1.0), 0.5, 1.0, 1e-10).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-14 && (r.rhs - 0.5).abs() < 1e-10, "{r:?}");

        let flat = Affine { a: 0.0, b: 1.7 };
        let r = elliptic_identity_bm(flat, &q, (-1.0, 2.0), 0.3, 0.5, 1e-12).unwrap();
        assert_eq!((r.lhs, r.rhs), (q.eval(1.7), q.eval(1.7)));

        assert!(matches!(
            elliptic_identity_bm(id, &sq, (0.0, 1.0), 1.5, 1.0, 1e-10),
            Err(Error::OutsideInterval { .. })
        ));
    }

    #[test]
    fn elliptic_identity_off_centre_and_other_rates() {
        let u = Affine { a: -0.7, b: 0.4 };
        for phi in [
            YoungFunction::power(3.0).unwrap(),
            YoungFunction::power_log(2.0, 1.0).unwrap(),
        ] {
            for (x, s2) in [(0.1, 1.0), (1.3, 0.25), (2.4, 4.0)] {
                let r = elliptic_identity_bm(u, &phi, (-0.5, 2.5), x, s2, 1e-10).unwrap();
                assert!(r.verdict.passed(), "{r:?}");
            }
        }
    }

    #[test]
    fn elliptic_exit_sampling() {
        let cfg = ExitMcConfig {
            dt: 1e-4,
            paths: 4000,
            seed: 8,
            exec: Execution::default(),
        };
        let q = YoungFunction::power(4.0).unwrap();
        let r = elliptic_exit_mc(Affine { a: 1.0, b: 0.0 }, &q, (0.0, 1.0), 0.5, 1.0, &cfg).unwrap();
        assert!(r.verdict.passed(), "{r:?}");
    }
}
