//! Exact and Monte-Carlo checks of the φ-isometry and its companions.
//!
//! Exact checks enumerate a finite martingale tree. Monte-Carlo checks draw
//! path `i` from stream `i` of the seed, collect per-path samples in index
//! order and reduce them with a fixed pairwise sum, so a report depends only
//! on `(seed, paths)`.

use rand::Rng;
use serde::Serialize;

use crate::convex::{LogGrid, YoungFunction};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::paths::{
    simulate_independent_pair, simulate_indexed, stop_path, LevyModel, SamplePath, SimSpec,
};
use crate::stats::{paired_difference, pairwise_sum, MeanEstimate};
use crate::variation::pathwise_variation;

/// Largest tree depth `enumerate_isometry` accepts.
pub const MAX_ENUMERATION_DEPTH: usize = 22;

const MARTINGALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Two estimated sides of an identity or inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_allowance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_stderr: Option<f64>,
    pub verdict: Verdict,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let rel_err = abs_err / lhs.abs().max(rhs.abs()).max(1e-300);
        Self {
            lhs,
            rhs,
            abs_err,
            rel_err,
            n_samples: None,
            stderr: None,
            grid_allowance: None,
            lhs_stderr: None,
            rhs_stderr: None,
            verdict: Verdict::Fail,
        }
    }

    /// Exact comparison: passes when `rel_err < tol`.
    pub fn exact(lhs: f64, rhs: f64, tol: f64) -> Self {
        let mut r = Self::new(lhs, rhs);
        r.verdict = Verdict::from_bool(r.rel_err < tol);
        r
    }

    fn from_samples(lhs: &[f64], rhs: &[f64]) -> Self {
        let l = MeanEstimate::from_samples(lhs);
        let r = MeanEstimate::from_samples(rhs);
        let d = paired_difference(lhs, rhs);
        let mut rep = Self::new(l.mean, r.mean);
        rep.n_samples = Some(lhs.len());
        rep.stderr = Some(d.stderr);
        rep.lhs_stderr = Some(l.stderr);
        rep.rhs_stderr = Some(r.stderr);
        rep
    }

    fn slack(&self, z: f64) -> f64 {
        z * self.stderr.unwrap_or(0.0) + self.grid_allowance.unwrap_or(0.0)
    }

    /// `|lhs − rhs| ≤ z·SE + allowance`.
    pub fn holds_equal(&self, z: f64) -> bool {
        self.abs_err <= self.slack(z)
    }

    /// `lhs ≤ rhs + z·SE + allowance`.
    pub fn holds_at_most(&self, z: f64) -> bool {
        self.lhs <= self.rhs + self.slack(z)
    }

    fn judge_equal(mut self, z: f64) -> Self {
        self.verdict = Verdict::from_bool(self.holds_equal(z));
        self
    }

    fn judge_at_most(mut self, z: f64) -> Self {
        self.verdict = Verdict::from_bool(self.holds_at_most(z));
        self
    }
}

/// A finite-horizon martingale on a tree. Every leaf sits at depth `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMartingale {
    values: Vec<f64>,
    probs: Vec<f64>,
    first_child: Vec<u32>,
    n_children: Vec<u8>,
    depth: usize,
}

/// One child of a node: branch probability and subtree.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub node: TreeSpec,
}

/// Nested description of a tree, used to build a [`FiniteMartingale`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    pub value: f64,
    pub children: Vec<Branch>,
}

impl FiniteMartingale {
    /// Validates branch probabilities, the martingale property and equal
    /// leaf depth.
    pub fn new(root: TreeSpec) -> Result<Self> {
        let mut m = FiniteMartingale {
            values: vec![root.value],
            probs: vec![1.0],
            first_child: vec![0],
            n_children: vec![0],
            depth: 0,
        };
        let mut leaf_depth = None;
        // breadth-first so that children of a node are contiguous
        let mut queue = std::collections::VecDeque::from([(0usize, 0usize, root)]);
        while let Some((id, depth, node)) = queue.pop_front() {
            if node.children.is_empty() {
                match leaf_depth {
                    None => leaf_depth = Some(depth),
                    Some(d) if d != depth => {
                        return Err(Error::InvalidParameter(format!(
                            "leaves at depths {d} and {depth}"
                        )))
                    }
                    _ => {}
                }
                continue;
            }
            if node.children.len() > u8::MAX as usize {
                return Err(Error::InvalidParameter("too many children".into()));
            }
            let total: f64 = node.children.iter().map(|b| b.prob).sum();
            if node.children.iter().any(|b| !(b.prob > 0.0)) || (total - 1.0).abs() > MARTINGALE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "branch probabilities at node {id} sum to {total}"
                )));
            }
            let mean: f64 = node.children.iter().map(|b| b.prob * b.node.value).sum();
            let scale = node.value.abs().max(1.0);
            if (mean - node.value).abs() > MARTINGALE_TOL * scale {
                return Err(Error::InvalidParameter(format!(
                    "node {id} has value {} but children average {mean}",
                    node.value
                )));
            }
            m.first_child[id] = m.values.len() as u32;
            m.n_children[id] = node.children.len() as u8;
            for b in node.children {
                let child = m.values.len();
                m.values.push(b.node.value);
                m.probs.push(b.prob);
                m.first_child.push(0);
                m.n_children.push(0);
                queue.push_back((child, depth + 1, b.node));
            }
        }
        m.depth = leaf_depth.unwrap_or(0);
        Ok(m)
    }

    /// Symmetric walk x₀ ± step for `n` steps (2ⁿ leaves).
    pub fn symmetric_walk(n: usize, x0: f64, step: f64) -> Result<Self> {
        if n > MAX_ENUMERATION_DEPTH {
            return Err(Error::DepthExceeded {
                depth: n,
                cap: MAX_ENUMERATION_DEPTH,
            });
        }
        fn build(x: f64, step: f64, left: usize) -> TreeSpec {
            TreeSpec {
                value: x,
                children: if left == 0 {
                    Vec::new()
                } else {
                    vec![
                        Branch {
                            prob: 0.5,
                            node: build(x - step, step, left - 1),
                        },
                        Branch {
                            prob: 0.5,
                            node: build(x + step, step, left - 1),
                        },
                    ]
                },
            }
        }
        Self::new(build(x0, step, n))
    }

    /// Random tree: 2 or 3 children per node, random probabilities and
    /// increments re-centred to mean zero.
    pub fn random<R: Rng>(depth: usize, rng: &mut R) -> Result<Self> {
        fn build<R: Rng>(x: f64, left: usize, rng: &mut R) -> TreeSpec {
            if left == 0 {
                return TreeSpec {
                    value: x,
                    children: Vec::new(),
                };
            }
            let k = rng.random_range(2..=3usize);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let rest: f64 = probs[..k - 1].iter().sum();
            probs[k - 1] = 1.0 - rest;
            let steps: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
            let drift: f64 = probs.iter().zip(&steps).map(|(p, d)| p * d).sum();
            // last child absorbs the rounding left by the re-centring
            let mut values: Vec<f64> = steps.iter().map(|d| x + d - drift).collect();
            let partial: f64 = probs[..k - 1]
                .iter()
                .zip(&values[..k - 1])
                .map(|(p, v)| p * v)
                .sum();
            values[k - 1] = (x - partial) / probs[k - 1];
            TreeSpec {
                value: x,
                children: probs
                    .into_iter()
                    .zip(values)
                    .map(|(prob, v)| Branch {
                        prob,
                        node: build(v, left - 1, rng),
                    })
                    .collect(),
            }
        }
        let x0 = rng.random_range(-1.0..1.0);
        Self::new(build(x0, depth, rng))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Visits every leaf in a fixed depth-first order with its probability
    /// and the sequence of values along the way.
    fn for_each_path<F: FnMut(f64, &[f64])>(&self, mut f: F) {
        let mut stack = vec![(0usize, 1.0f64, 0usize)];
        let mut trail: Vec<f64> = Vec::with_capacity(self.depth + 1);
        while let Some((id, p, level)) = stack.pop() {
            trail.truncate(level);
            trail.push(self.values[id]);
            let k = self.n_children[id] as usize;
            if k == 0 {
                f(p, &trail);
                continue;
            }
            let first = self.first_child[id] as usize;
            for c in (first..first + k).rev() {
                stack.push((c, p * self.probs[c], level + 1));
            }
        }
    }
}

/// Eφ(X_n) against E V^φ(X)_n by enumerating every path of the tree.
pub fn enumerate_isometry(m: &FiniteMartingale, phi: &YoungFunction) -> Result<IdentityReport> {
    if m.depth > MAX_ENUMERATION_DEPTH {
        return Err(Error::DepthExceeded {
            depth: m.depth,
            cap: MAX_ENUMERATION_DEPTH,
        });
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut failure = None;
    m.for_each_path(|p, x| {
        let mut v = phi.eval(x[0]);
        for w in x.windows(2) {
            match phi.bregman_divergence(w[0], w[1]) {
                Ok(f) => v += f,
                Err(e) => failure = Some(e),
            }
        }
        lhs += p * phi.eval(x[x.len() - 1]);
        rhs += p * v;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(IdentityReport::exact(lhs, rhs, 1e-10))
}

/// E[X₀²] + Σ E(ΔX_k)², the common value of both sides when φ = λ².
pub fn quadratic_oracle(m: &FiniteMartingale) -> f64 {
    let mut total = 0.0;
    m.for_each_path(|p, x| {
        let incr: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        total += p * (x[0] * x[0] + incr);
    });
    total
}

/// A finite probability space with a partition into cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    pub probs: Vec<f64>,
    /// Cell label of each outcome.
    pub cells: Vec<usize>,
}

impl FiniteSpace {
    /// Up to 11 outcomes with random weights, a random partition in which
    /// every cell is occupied, and random values of Y.
    pub fn random<R: Rng>(rng: &mut R) -> (Self, Vec<f64>) {
        let n = rng.random_range(1..12usize);
        let cells_n = rng.random_range(1..=n);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let cells: Vec<usize> = (0..n)
            .map(|i| if i < cells_n { i } else { rng.random_range(0..cells_n) })
            .collect();
        let y = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        (
            FiniteSpace {
                probs: raw.iter().map(|w| w / total).collect(),
                cells,
            },
            y,
        )
    }
}

/// Eφ(Y) = Eφ(X) + E F_φ(X, Y) with X = E[Y | cells], computed exactly.
pub fn conditional_identity(
    space: &FiniteSpace,
    y: &[f64],
    phi: &YoungFunction,
) -> Result<IdentityReport> {
    if space.probs.len() != y.len() || space.cells.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: space.probs.len(),
            right: y.len(),
        });
    }
    if space.probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParameter("negative probability".into()));
    }
    let n_cells = space.cells.iter().max().map_or(0, |c| c + 1);
    let mut mass = vec![0.0; n_cells];
    let mut moment = vec![0.0; n_cells];
    for ((p, c), v) in space.probs.iter().zip(&space.cells).zip(y) {
        mass[*c] += p;
        moment[*c] += p * v;
    }
    for (c, m) in mass.iter().enumerate() {
        if *m == 0.0 && space.cells.contains(&c) {
            return Err(Error::ZeroProbabilityCell(c));
        }
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for ((p, c), v) in space.probs.iter().zip(&space.cells).zip(y) {
        let x = moment[*c] / mass[*c];
        lhs += p * phi.eval(*v);
        rhs += p * (phi.eval(x) + phi.bregman_divergence(x, *v)?);
    }
    Ok(IdentityReport::exact(lhs, rhs, 1e-12))
}

/// φ(x+y) + φ(x−y) − 2φ(x) − 2φ(y): zero for every x, y exactly when φ is
/// quadratic.
pub fn rademacher_residual(phi: &YoungFunction, x: f64, y: f64) -> f64 {
    phi.eval(x + y) + phi.eval(x - y) - 2.0 * phi.eval(x) - 2.0 * phi.eval(y)
}

/// Shared knobs of the Monte-Carlo checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub spec: SimSpec,
    pub paths: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl McConfig {
    pub fn new(spec: SimSpec, paths: usize, seed: u64) -> Self {
        Self {
            spec,
            paths,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::InvalidParameter(
                "need at least two paths for a standard error".into(),
            ));
        }
        Ok(())
    }

    fn collect<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.exec
            .map(self.paths, |i| f(i as u64))
            .into_iter()
            .collect()
    }
}

fn coarse_stride(path: &SamplePath, spec: &SimSpec) -> Option<u32> {
    (spec.fine_steps() >= 2 && path.qv_rate > 0.0).then_some(2)
}

fn unzip3(v: Vec<(f64, f64, f64)>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(v.len());
    let mut b = Vec::with_capacity(v.len());
    let mut c = Vec::with_capacity(v.len());
    for (x, y, z) in v {
        a.push(x);
        b.push(y);
        c.push(z);
    }
    (a, b, c)
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Eφ(X_T) against E V^φ(X)_T over independent paths. The grid allowance is
/// the change in the mean of V^φ when every other grid node is dropped.
pub fn mc_isometry(
    model: &LevyModel,
    phi: &YoungFunction,
    cfg: &McConfig,
) -> Result<IdentityReport> {
    cfg.validate()?;
    let samples = cfg.collect(|i| {
        let path = simulate_indexed(model, &cfg.spec, cfg.seed, i)?;
        let v = pathwise_variation(phi, &path)?.terminal();
        let coarse = match coarse_stride(&path, &cfg.spec) {
            Some(s) => pathwise_variation(phi, &path.subsample(s))?.terminal(),
            None => v,
        };
        Ok((phi.eval(path.terminal()), v, coarse))
    })?;
    let (lhs, rhs, coarse) = unzip3(samples);
    let mut rep = IdentityReport::from_samples(&lhs, &rhs);
    rep.grid_allowance = Some((rep.rhs - mean(&coarse)).abs());
    Ok(rep.judge_equal(3.0))
}

/// Eφ(X_{τ∧T}) against E V^φ(X)_{τ∧T}, τ the first exit from (a, b)
/// detected at path nodes.
pub fn mc_stopped_isometry(
    model: &LevyModel,
    phi: &YoungFunction,
    interval: (f64, f64),
    cfg: &McConfig,
) -> Result<IdentityReport> {
    cfg.validate()?;
    let (a, b) = interval;
    if !(a < cfg.spec.x0 && cfg.spec.x0 < b) {
        return Err(Error::OutsideInterval {
            x: cfg.spec.x0,
            left: a,
            right: b,
        });
    }
    let samples = cfg.collect(|i| {
        let path = simulate_indexed(model, &cfg.spec, cfg.seed, i)?;
        let stopped = stop_path(&path, a, b).path;
        let v = pathwise_variation(phi, &stopped)?.terminal();
        let coarse = match coarse_stride(&path, &cfg.spec) {
            Some(s) => {
                let c = stop_path(&path.subsample(s), a, b).path;
                pathwise_variation(phi, &c)?.terminal()
            }
            None => v,
        };
        Ok((phi.eval(stopped.terminal()), v, coarse))
    })?;
    let (lhs, rhs, coarse) = unzip3(samples);
    let mut rep = IdentityReport::from_samples(&lhs, &rhs);
    rep.grid_allowance = Some((rep.rhs - mean(&coarse)).abs());
    Ok(rep.judge_equal(3.0))
}

/// E sup_{s ≤ T} φ(X_s) against C_φ Eφ(X_T); the supremum runs over path
/// nodes.
pub fn doob_check(
    model: &LevyModel,
    phi: &YoungFunction,
    cfg: &McConfig,
) -> Result<IdentityReport> {
    cfg.validate()?;
    let c_phi = phi.indices()?.doob_constant()?;
    let samples = cfg.collect(|i| {
        let path = simulate_indexed(model, &cfg.spec, cfg.seed, i)?;
        let sup = path
            .values
            .iter()
            .chain(&path.left)
            .map(|x| phi.eval(*x))
            .fold(0.0, f64::max);
        Ok((sup, c_phi * phi.eval(path.terminal())))
    })?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok(IdentityReport::from_samples(&lhs, &rhs).judge_at_most(3.0))
}

/// The two bounds ½E[V(X) + V(Y)] ≤ E V(X+Y) ≤ (K_φ/2)E[V(X) + V(Y)] for
/// independent X and Y, plus the additivity gap E V(X+Y) − E[V(X) + V(Y)].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumReport {
    pub mean_vx: f64,
    pub mean_vy: f64,
    pub mean_vsum: f64,
    pub k_phi: f64,
    pub lower: IdentityReport,
    pub upper: IdentityReport,
    pub additivity: IdentityReport,
    pub verdict: Verdict,
}

pub fn sum_of_independent(
    model_x: &LevyModel,
    model_y: &LevyModel,
    phi: &YoungFunction,
    cfg: &McConfig,
) -> Result<SumReport> {
    cfg.validate()?;
    let k_phi = match phi.closed_forms() {
        Some(c) => c.k_phi,
        None => phi.delta2_constant(&LogGrid::default())?.k_phi,
    };
    let samples = cfg.collect(|i| {
        let (x, y, s) = simulate_independent_pair(model_x, model_y, &cfg.spec, cfg.seed, i)?;
        Ok((
            pathwise_variation(phi, &x)?.terminal(),
            pathwise_variation(phi, &y)?.terminal(),
            pathwise_variation(phi, &s)?.terminal(),
        ))
    })?;
    let (vx, vy, vs) = unzip3(samples);
    let parts: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a + b).collect();
    let half: Vec<f64> = parts.iter().map(|v| 0.5 * v).collect();
    let scaled: Vec<f64> = parts.iter().map(|v| 0.5 * k_phi * v).collect();
    let lower = IdentityReport::from_samples(&half, &vs).judge_at_most(3.0);
    let upper = IdentityReport::from_samples(&vs, &scaled).judge_at_most(3.0);
    let additivity = IdentityReport::from_samples(&vs, &parts).judge_equal(3.0);
    let verdict = Verdict::from_bool(lower.verdict.passed() && upper.verdict.passed());
    Ok(SumReport {
        mean_vx: mean(&vx),
        mean_vy: mean(&vy),
        mean_vsum: mean(&vs),
        k_phi,
        lower,
        upper,
        additivity,
        verdict,
    })
}
