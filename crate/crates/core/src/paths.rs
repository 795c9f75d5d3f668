//! Simulation of 1-d Lévy jump-diffusions Z = σW + J with exact jump logs.
//!
//! Every jump instant is a node of the path, and both the left limit and the
//! post-jump value are stored there. The Brownian part is sampled on the
//! merged set of grid and jump times, so the joint law at all nodes is exact.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric law of a single compound-Poisson jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    /// ±a with probability ½ each.
    TwoPoint { a: f64 },
    /// Uniform on (−a, a).
    Uniform { a: f64 },
    /// Centred Gaussian with standard deviation s.
    Gaussian { s: f64 },
}

impl JumpLaw {
    fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::TwoPoint { a } => a * a,
            JumpLaw::Uniform { a } => a * a / 3.0,
            JumpLaw::Gaussian { s } => s * s,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            JumpLaw::TwoPoint { a } | JumpLaw::Uniform { a } => a,
            JumpLaw::Gaussian { s } => s,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "jump-law scale must be positive, got {v}"
            )));
        }
        Ok(())
    }
}

/// Jump component of a Lévy model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum JumpPart {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Compound Poisson with ν = intensity · law.
    #[serde(rename = "cp")]
    CompoundPoisson {
        intensity: f64,
        #[serde(flatten)]
        law: JumpLaw,
    },
    /// ν(dz) = c|z|^{−1−α} dz on eps ≤ |z| ≤ z_max (z_max = ∞ when absent).
    /// Jumps below eps are dropped, not compensated.
    #[serde(rename = "stable")]
    TruncatedStable {
        alpha: f64,
        c: f64,
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<f64>,
    },
}

impl JumpPart {
    /// Total mass of ν.
    pub fn intensity(&self) -> f64 {
        match *self {
            JumpPart::None => 0.0,
            JumpPart::CompoundPoisson { intensity, .. } => intensity,
            JumpPart::TruncatedStable {
                alpha,
                c,
                eps,
                z_max,
            } => {
                let upper = z_max.map_or(0.0, |z| z.powf(-alpha));
                2.0 * c * (eps.powf(-alpha) - upper) / alpha
            }
        }
    }

    /// ∫ z² ν(dz); infinite for an untruncated stable tail.
    pub fn second_moment_rate(&self) -> f64 {
        match *self {
            JumpPart::None => 0.0,
            JumpPart::CompoundPoisson { intensity, law } => intensity * law.second_moment(),
            JumpPart::TruncatedStable {
                alpha,
                c,
                eps,
                z_max,
            } => match z_max {
                Some(z) => 2.0 * c * (z.powf(2.0 - alpha) - eps.powf(2.0 - alpha)) / (2.0 - alpha),
                None => f64::INFINITY,
            },
        }
    }

    /// Checks parameters; `allow_zero_cutoff` admits eps = 0 for symbols.
    pub fn validate(&self, allow_zero_cutoff: bool) -> Result<()> {
        match *self {
            JumpPart::None => Ok(()),
            JumpPart::CompoundPoisson { intensity, law } => {
                if !(intensity.is_finite() && intensity > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "compound-Poisson intensity must be positive, got {intensity}"
                    )));
                }
                law.validate()
            }
            JumpPart::TruncatedStable {
                alpha,
                c,
                eps,
                z_max,
            } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "stable index must lie in (0, 2), got {alpha}"
                    )));
                }
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "stable scale must be positive, got {c}"
                    )));
                }
                let eps_ok = if allow_zero_cutoff {
                    eps >= 0.0 && eps.is_finite()
                } else {
                    eps > 0.0 && eps.is_finite()
                };
                if !eps_ok {
                    return Err(Error::InvalidParameter(format!(
                        "stable cutoff eps is invalid: {eps}"
                    )));
                }
                if let Some(z) = z_max {
                    if !(z.is_finite() && z > eps) {
                        return Err(Error::InvalidParameter(format!(
                            "z_max must exceed eps, got {z}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn sample_size<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpPart::None => 0.0,
            JumpPart::CompoundPoisson { law, .. } => match law {
                JumpLaw::TwoPoint { a } => {
                    if rng.random::<bool>() {
                        a
                    } else {
                        -a
                    }
                }
                JumpLaw::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
                JumpLaw::Gaussian { s } => s * rng.sample::<f64, _>(StandardNormal),
            },
            JumpPart::TruncatedStable {
                alpha, eps, z_max, ..
            } => {
                // inverse transform of the tail z ↦ (ε^{−α} − z^{−α}) / (ε^{−α} − z_max^{−α})
                let lo = eps.powf(-alpha);
                let hi = z_max.map_or(0.0, |z| z.powf(-alpha));
                let u: f64 = rng.random();
                let magnitude = (lo - u * (lo - hi)).powf(-1.0 / alpha);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }
}

/// σ²-diffusion plus a symmetric jump part; a martingale by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    pub sigma2: f64,
    #[serde(default)]
    pub jumps: JumpPart,
}

impl LevyModel {
    pub fn brownian(sigma2: f64) -> Self {
        Self {
            sigma2,
            jumps: JumpPart::None,
        }
    }

    pub fn compound_poisson(sigma2: f64, intensity: f64, law: JumpLaw) -> Self {
        Self {
            sigma2,
            jumps: JumpPart::CompoundPoisson { intensity, law },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be finite and nonnegative, got {}",
                self.sigma2
            )));
        }
        self.jumps.validate(false)
    }

    /// Var(Z_t)/t = σ² + ∫ z² ν(dz).
    pub fn variance_rate(&self) -> f64 {
        self.sigma2 + self.jumps.second_moment_rate()
    }
}

/// Grid and start point for a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub horizon: f64,
    /// Base grid size M (dyadic level 0).
    pub steps: usize,
    /// Number of dyadic refinements simulated; the fine grid has M·2^levels
    /// steps.
    #[serde(default)]
    pub levels: u32,
    #[serde(default)]
    pub x0: f64,
    /// Negates every Gaussian increment and every jump.
    #[serde(default)]
    pub antithetic: bool,
}

impl SimSpec {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self {
            horizon,
            steps,
            levels: 0,
            x0: 0.0,
            antithetic: false,
        }
    }

    pub fn with_levels(mut self, levels: u32) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn fine_steps(&self) -> usize {
        self.steps << self.levels
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("need at least one step".into()));
        }
        if self.levels > 24 {
            return Err(Error::InvalidParameter(format!(
                "too many refinement levels: {}",
                self.levels
            )));
        }
        Ok(())
    }
}

/// One jump of a path: time, left limit and post-jump value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    pub left: f64,
    pub right: f64,
}

/// Marker for nodes that are not on the simulation grid.
pub const OFF_GRID: u32 = u32::MAX;

/// A simulated path on grid ∪ jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    /// X_t (post-jump at jump nodes).
    pub values: Vec<f64>,
    /// X_{t−}; equal to `values` at continuity nodes.
    pub left: Vec<f64>,
    pub is_jump: Vec<bool>,
    /// Index on the fine grid, or [`OFF_GRID`].
    pub fine_index: Vec<u32>,
    pub jumps: Vec<JumpRecord>,
    /// d[X]^c_t / dt.
    pub qv_rate: f64,
    /// [X]^c grows only up to this time (the horizon, or τ after stopping).
    pub qv_until: f64,
    pub horizon: f64,
    /// Dyadic levels available for partition refinement.
    pub levels: u32,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths have at least one node")
    }

    /// Builds a path from CSV-style rows `(t, x, is_jump, x_left)`. Non-jump
    /// rows are numbered as grid points in order.
    pub fn from_rows(rows: &[(f64, f64, bool, f64)], qv_rate: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("empty path".into()));
        }
        if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "path times must be strictly increasing".into(),
            ));
        }
        let mut path = SamplePath {
            times: Vec::with_capacity(rows.len()),
            values: Vec::with_capacity(rows.len()),
            left: Vec::with_capacity(rows.len()),
            is_jump: Vec::with_capacity(rows.len()),
            fine_index: Vec::with_capacity(rows.len()),
            jumps: Vec::new(),
            qv_rate,
            qv_until: rows.last().unwrap().0,
            horizon: rows.last().unwrap().0,
            levels: 0,
        };
        let mut grid = 0u32;
        for &(t, x, jump, xl) in rows {
            path.times.push(t);
            path.values.push(x);
            path.left.push(if jump { xl } else { x });
            path.is_jump.push(jump);
            if jump {
                path.fine_index.push(OFF_GRID);
                path.jumps.push(JumpRecord {
                    time: t,
                    left: xl,
                    right: x,
                });
            } else {
                path.fine_index.push(grid);
                grid += 1;
            }
        }
        Ok(path)
    }

    /// Rows `(t, x, is_jump, x_left)` for CSV output.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, bool, f64)> + '_ {
        (0..self.len()).map(|i| (self.times[i], self.values[i], self.is_jump[i], self.left[i]))
    }

    /// Index of the node at exactly time `t`.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|s| s.partial_cmp(&t).expect("finite times"))
            .ok()
    }

    /// Pointwise sum of two paths sharing the same nodes.
    /// Keeps every `stride`-th grid node, all off-grid nodes and the
    /// terminal node. Left limits of retained grid nodes are reset to their
    /// values, as on a coarser simulation grid.
    pub fn subsample(&self, stride: u32) -> SamplePath {
        let stride = stride.max(1);
        let last = self.len() - 1;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let f = self.fine_index[i];
                i == last || f == OFF_GRID || f.is_multiple_of(stride)
            })
            .collect();
        let pick = |v: &Vec<f64>| -> Vec<f64> { keep.iter().map(|&i| v[i]).collect() };
        SamplePath {
            times: pick(&self.times),
            values: pick(&self.values),
            left: keep
                .iter()
                .map(|&i| if self.is_jump[i] { self.left[i] } else { self.values[i] })
                .collect(),
            is_jump: keep.iter().map(|&i| self.is_jump[i]).collect(),
            fine_index: keep.iter().map(|&i| self.fine_index[i]).collect(),
            jumps: self.jumps.clone(),
            qv_rate: self.qv_rate,
            qv_until: self.qv_until,
            horizon: self.horizon,
            levels: self.levels,
        }
    }

    pub fn sum(&self, other: &SamplePath) -> Result<SamplePath> {
        if self.times != other.times {
            return Err(Error::InvalidParameter(
                "paths must share their node times".into(),
            ));
        }
        let n = self.len();
        let values: Vec<f64> = (0..n).map(|i| self.values[i] + other.values[i]).collect();
        let left: Vec<f64> = (0..n).map(|i| self.left[i] + other.left[i]).collect();
        let is_jump: Vec<bool> = (0..n)
            .map(|i| self.is_jump[i] || other.is_jump[i])
            .collect();
        let jumps = (0..n)
            .filter(|&i| is_jump[i] && i > 0)
            .map(|i| JumpRecord {
                time: self.times[i],
                left: left[i],
                right: values[i],
            })
            .collect();
        Ok(SamplePath {
            times: self.times.clone(),
            values,
            left,
            is_jump,
            fine_index: self.fine_index.clone(),
            jumps,
            qv_rate: self.qv_rate + other.qv_rate,
            qv_until: self.qv_until.min(other.qv_until),
            horizon: self.horizon,
            levels: self.levels,
        })
    }
}

/// Counter-based generator for path `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of an independent second family of streams.
pub fn derived_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_jumps<R: Rng>(model: &LevyModel, spec: &SimSpec, rng: &mut R) -> Vec<(f64, f64)> {
    let rate = model.jumps.intensity() * spec.horizon;
    if rate <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(rate).expect("positive Poisson mean").sample(rng) as usize;
    let mut events: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            // (0, T]
            let t = spec.horizon * (1.0 - rng.random::<f64>());
            let mut size = model.jumps.sample_size(rng);
            if spec.antithetic {
                size = -size;
            }
            (t, size)
        })
        .collect();
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
    events
}

/// Fills in node times, grid indices and jump sizes for the merged grid.
/// `foreign` are extra node times carrying no jump of this path.
fn merged_nodes(
    spec: &SimSpec,
    own: &[(f64, f64)],
    foreign: &[f64],
) -> (Vec<f64>, Vec<u32>, Vec<f64>, Vec<bool>) {
    let n_fine = spec.fine_steps();
    let h = spec.horizon / n_fine as f64;
    let mut times = Vec::with_capacity(n_fine + 1 + own.len() + foreign.len());
    let mut fine = Vec::with_capacity(times.capacity());
    let mut sizes = Vec::with_capacity(times.capacity());
    let mut jump = Vec::with_capacity(times.capacity());
    let (mut j, mut k) = (0, 0);
    for i in 0..=n_fine {
        let tg = if i == n_fine {
            spec.horizon
        } else {
            i as f64 * h
        };
        loop {
            let next_own = own.get(j).map(|e| e.0).unwrap_or(f64::INFINITY);
            let next_foreign = foreign.get(k).copied().unwrap_or(f64::INFINITY);
            let next = next_own.min(next_foreign);
            if next >= tg {
                break;
            }
            times.push(next);
            fine.push(OFF_GRID);
            if next_own <= next_foreign {
                sizes.push(own[j].1);
                jump.push(true);
                j += 1;
                if next_foreign == next_own {
                    k += 1;
                }
            } else {
                sizes.push(0.0);
                jump.push(false);
                k += 1;
            }
        }
        // jumps that land exactly on a grid time
        let mut size = 0.0;
        let mut is_jump = false;
        while j < own.len() && own[j].0 == tg {
            size += own[j].1;
            is_jump = true;
            j += 1;
        }
        while k < foreign.len() && foreign[k] == tg {
            k += 1;
        }
        times.push(tg);
        fine.push(i as u32);
        sizes.push(size);
        jump.push(is_jump && size != 0.0);
    }
    (times, fine, sizes, jump)
}

fn assemble<R: Rng>(
    model: &LevyModel,
    spec: &SimSpec,
    own: &[(f64, f64)],
    foreign: &[f64],
    rng: &mut R,
) -> SamplePath {
    let (times, fine_index, sizes, is_jump) = merged_nodes(spec, own, foreign);
    let n = times.len();
    let sigma = model.sigma2.sqrt();
    let sign = if spec.antithetic { -1.0 } else { 1.0 };
    let mut values = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut jumps = Vec::with_capacity(own.len());
    let mut x = spec.x0;
    values.push(x);
    left.push(x);
    for i in 1..n {
        if sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            x += sign * sigma * (times[i] - times[i - 1]).sqrt() * z;
        }
        left.push(x);
        if is_jump[i] {
            let before = x;
            x += sizes[i];
            jumps.push(JumpRecord {
                time: times[i],
                left: before,
                right: x,
            });
        }
        values.push(x);
    }
    SamplePath {
        times,
        values,
        left,
        is_jump,
        fine_index,
        jumps,
        qv_rate: model.sigma2,
        qv_until: spec.horizon,
        horizon: spec.horizon,
        levels: spec.levels,
    }
}

/// Simulates path number `index` of a run seeded with `seed`.
pub fn simulate_indexed(
    model: &LevyModel,
    spec: &SimSpec,
    seed: u64,
    index: u64,
) -> Result<SamplePath> {
    model.validate()?;
    spec.validate()?;
    let mut rng = stream_rng(seed, index);
    let events = sample_jumps(model, spec, &mut rng);
    Ok(assemble(model, spec, &events, &[], &mut rng))
}

/// Simulates a single path (stream 0).
pub fn simulate(model: &LevyModel, spec: &SimSpec, seed: u64) -> Result<SamplePath> {
    simulate_indexed(model, spec, seed, 0)
}

/// Independent X and Y on a common node set (grid ∪ both jump logs), plus
/// X + Y. X draws from `(seed, index)`, Y from an independent seed family.
pub fn simulate_independent_pair(
    model_x: &LevyModel,
    model_y: &LevyModel,
    spec: &SimSpec,
    seed: u64,
    index: u64,
) -> Result<(SamplePath, SamplePath, SamplePath)> {
    model_x.validate()?;
    model_y.validate()?;
    spec.validate()?;
    let mut rx = stream_rng(seed, index);
    let mut ry = stream_rng(derived_seed(seed, 1), index);
    let ex = sample_jumps(model_x, spec, &mut rx);
    let ey = sample_jumps(model_y, spec, &mut ry);
    let tx: Vec<f64> = ex.iter().map(|e| e.0).collect();
    let ty: Vec<f64> = ey.iter().map(|e| e.0).collect();
    let spec_y = SimSpec { x0: 0.0, ..*spec };
    let x = assemble(model_x, spec, &ex, &ty, &mut rx);
    let y = assemble(model_y, &spec_y, &ey, &tx, &mut ry);
    let s = x.sum(&y)?;
    Ok((x, y, s))
}

/// Path stopped at the first exit from an open interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedPath {
    pub path: SamplePath,
    pub exited: bool,
    /// Node index of τ in both the original and the stopped path.
    pub exit_index: Option<usize>,
}

/// Freezes the path at the first node where X ∉ (a, b). Exits are only
/// detected at nodes, so Brownian excursions between grid points are missed.
pub fn stop_path(path: &SamplePath, a: f64, b: f64) -> StoppedPath {
    let Some(k) = path.values.iter().position(|&x| x <= a || x >= b) else {
        return StoppedPath {
            path: path.clone(),
            exited: false,
            exit_index: None,
        };
    };
    let tau = path.times[k];
    let x_tau = path.values[k];
    let mut out = SamplePath {
        times: path.times[..=k].to_vec(),
        values: path.values[..=k].to_vec(),
        left: path.left[..=k].to_vec(),
        is_jump: path.is_jump[..=k].to_vec(),
        fine_index: path.fine_index[..=k].to_vec(),
        jumps: path.jumps.iter().filter(|j| j.time <= tau).copied().collect(),
        qv_rate: path.qv_rate,
        qv_until: tau,
        horizon: path.horizon,
        levels: path.levels,
    };
    for i in k + 1..path.len() {
        if path.fine_index[i] == OFF_GRID {
            continue;
        }
        out.times.push(path.times[i]);
        out.values.push(x_tau);
        out.left.push(x_tau);
        out.is_jump.push(false);
        out.fine_index.push(path.fine_index[i]);
    }
    StoppedPath {
        path: out,
        exited: true,
        exit_index: Some(k),
    }
}

/// Nondecreasing partition times, given as node indices of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPartition {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
}

impl RandomPartition {
    /// Grid of level `n` (M·2^n steps) merged with all jump nodes. Level 0
    /// is the simulation grid.
    pub fn dyadic(path: &SamplePath, level: u32) -> Result<Self> {
        if level > path.levels {
            return Err(Error::InvalidParameter(format!(
                "level {level} exceeds the {} simulated refinement levels",
                path.levels
            )));
        }
        let stride = 1u32 << (path.levels - level);
        let indices: Vec<usize> = (0..path.len())
            .filter(|&i| {
                let f = path.fine_index[i];
                path.is_jump[i] || (f != OFF_GRID && f.is_multiple_of(stride))
            })
            .collect();
        let times = indices.iter().map(|&i| path.times[i]).collect();
        Ok(Self { indices, times })
    }

    /// Every node of the path.
    pub fn full(path: &SamplePath) -> Self {
        Self {
            indices: (0..path.len()).collect(),
            times: path.times.clone(),
        }
    }

    /// Partition from explicit times; each must be a node of the path.
    pub fn from_times(path: &SamplePath, times: &[f64]) -> Result<Self> {
        let indices = times
            .iter()
            .map(|&t| path.node_at(t).ok_or(Error::PartitionPoint(t)))
            .collect::<Result<Vec<_>>>()?;
        if indices.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "partition times must be nondecreasing".into(),
            ));
        }
        Ok(Self {
            indices,
            times: times.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Checks that the partition indexes nodes of `path`.
    pub fn check(&self, path: &SamplePath) -> Result<()> {
        for (&i, &t) in self.indices.iter().zip(&self.times) {
            if i >= path.len() || path.times[i] != t {
                return Err(Error::PartitionPoint(t));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanEstimate;
    use std::f64::consts::PI;

    fn two_point(sigma2: f64, intensity: f64, a: f64) -> LevyModel {
        LevyModel::compound_poisson(sigma2, intensity, JumpLaw::TwoPoint { a })
    }

    #[test]
    fn model_json_roundtrip_matches_cli_format() {
        let text = r#"{"sigma2":1.0,"jumps":{"type":"cp","intensity":2.0,"law":"two_point","a":1.0}}"#;
        let m: LevyModel = serde_json::from_str(text).unwrap();
        assert_eq!(m, two_point(1.0, 2.0, 1.0));
        let back: LevyModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bm: LevyModel = serde_json::from_str(r#"{"sigma2":0.5}"#).unwrap();
        assert_eq!(bm, LevyModel::brownian(0.5));
        let st: LevyModel = serde_json::from_str(
            r#"{"sigma2":0,"jumps":{"type":"stable","alpha":1.5,"c":1,"eps":0.1,"z_max":10}}"#,
        )
        .unwrap();
        assert!(matches!(st.jumps, JumpPart::TruncatedStable { z_max: Some(_), .. }));
    }

    #[test]
    fn invalid_models() {
        assert!(LevyModel::brownian(-1.0).validate().is_err());
        assert!(two_point(1.0, 0.0, 1.0).validate().is_err());
        assert!(two_point(1.0, 1.0, 0.0).validate().is_err());
        let st = LevyModel {
            sigma2: 0.0,
            jumps: JumpPart::TruncatedStable {
                alpha: 1.5,
                c: 1.0,
                eps: 0.0,
                z_max: None,
            },
        };
        assert!(st.validate().is_err());
        assert!(st.jumps.validate(true).is_ok());
    }

    #[test]
    fn stable_intensity() {
        let j = JumpPart::TruncatedStable {
            alpha: 1.5,
            c: 1.0,
            eps: 0.25,
            z_max: None,
        };
        assert!((j.intensity() - 2.0 * 0.25f64.powf(-1.5) / 1.5).abs() < 1e-12);
    }

    #[test]
    fn pure_diffusion_has_no_jumps() {
        let p = simulate(&LevyModel::brownian(1.0), &SimSpec::new(1.0, 64), 11).unwrap();
        assert!(p.jumps.is_empty());
        assert_eq!(p.qv_rate, 1.0);
        assert_eq!(p.len(), 65);
        assert_eq!(p.times[64], 1.0);
        assert_eq!(p.values, p.left);
    }

    #[test]
    fn pure_jump_two_point() {
        let p = simulate(&two_point(0.0, 3.0, 1.0), &SimSpec::new(1.0, 32), 5).unwrap();
        for i in 1..p.len() {
            if p.is_jump[i] {
                assert_eq!((p.values[i] - p.left[i]).abs(), 1.0);
            } else {
                assert_eq!(p.values[i], p.values[i - 1]);
            }
        }
        for j in &p.jumps {
            assert!(j.time > 0.0 && j.time <= 1.0);
            assert_eq!((j.right - j.left).abs(), 1.0);
        }
        assert!(p.jumps.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn jump_nodes_are_exact() {
        let m = two_point(1.0, 20.0, 0.5);
        let p = simulate(&m, &SimSpec::new(1.0, 16), 3).unwrap();
        assert!(!p.jumps.is_empty());
        for j in &p.jumps {
            let i = p.node_at(j.time).unwrap();
            assert!(p.is_jump[i]);
            assert_eq!(p.left[i], j.left);
            assert_eq!(p.values[i], j.right);
            assert_eq!(p.fine_index[i], OFF_GRID);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = two_point(0.7, 4.0, 0.3);
        let s = SimSpec::new(2.0, 100).with_levels(2);
        let a = simulate(&m, &s, 99).unwrap();
        let b = simulate(&m, &s, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &s, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn antithetic_mode_flips_the_path() {
        let m = LevyModel {
            sigma2: 0.8,
            jumps: JumpPart::CompoundPoisson {
                intensity: 5.0,
                law: JumpLaw::Gaussian { s: 0.4 },
            },
        };
        let s = SimSpec::new(1.0, 50);
        let a = simulate(&m, &s, 8).unwrap();
        let b = simulate(&m, &s.with_antithetic(true), 8).unwrap();
        assert_eq!(a.times, b.times);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn martingale_mean() {
        let m = LevyModel {
            sigma2: 0.5,
            jumps: JumpPart::CompoundPoisson {
                intensity: 2.0,
                law: JumpLaw::Uniform { a: 1.5 },
            },
        };
        let s = SimSpec::new(1.0, 4);
        let xs: Vec<f64> = (0..100_000)
            .map(|i| simulate_indexed(&m, &s, 2024, i).unwrap().terminal())
            .collect();
        let est = MeanEstimate::from_samples(&xs);
        assert!(est.mean.abs() < 3.0 * est.stderr, "{est:?}");
        // variance oracle: (σ² + λ a²/3) T
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - m.variance_rate()).abs() < 0.03);
    }

    #[test]
    fn truncated_stable_sizes_within_cutoffs() {
        let m = LevyModel {
            sigma2: 0.0,
            jumps: JumpPart::TruncatedStable {
                alpha: 1.5,
                c: 1.0,
                eps: 0.1,
                z_max: Some(5.0),
            },
        };
        let p = simulate(&m, &SimSpec::new(1.0, 8), 1).unwrap();
        assert!(!p.jumps.is_empty());
        for j in &p.jumps {
            let z = (j.right - j.left).abs();
            assert!((0.1..=5.0).contains(&z));
        }
    }

    #[test]
    fn stop_inside_is_unchanged() {
        let p = simulate(&LevyModel::brownian(0.01), &SimSpec::new(1.0, 32), 4).unwrap();
        let s = stop_path(&p, -100.0, 100.0);
        assert!(!s.exited);
        assert_eq!(s.path, p);
    }

    #[test]
    fn stop_retains_overshoot() {
        let rows = vec![
            (0.0, 0.0, false, 0.0),
            (0.25, 0.0, false, 0.0),
            (0.3, 2.0, true, 0.0),
            (0.5, 2.0, false, 2.0),
            (0.6, 0.5, true, 2.0),
            (0.75, 0.5, false, 0.5),
            (1.0, 0.5, false, 0.5),
        ];
        let p = SamplePath::from_rows(&rows, 0.0).unwrap();
        let s = stop_path(&p, -1.0, 1.0);
        assert!(s.exited);
        assert_eq!(s.exit_index, Some(2));
        assert_eq!(s.path.times, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        assert_eq!(s.path.values, vec![0.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.path.jumps.len(), 1);
        assert_eq!(s.path.qv_until, 0.3);
    }

    #[test]
    fn brownian_exit_probability_matches_series() {
        // P(τ > t) = (4/π) Σ_k (−1)^k/(2k+1) exp(−(2k+1)²π²t/8) on (−1, 1)
        let t = 5.0;
        let survive: f64 = (0..50)
            .map(|k| {
                let m = (2 * k + 1) as f64;
                4.0 / PI * (-1f64).powi(k) / m * (-m * m * PI * PI * t / 8.0).exp()
            })
            .sum();
        let oracle = 1.0 - survive;
        let spec = SimSpec::new(t, 2000);
        let n = 10_000;
        let exits = (0..n)
            .filter(|&i| {
                let p = simulate_indexed(&LevyModel::brownian(1.0), &spec, 77, i).unwrap();
                stop_path(&p, -1.0, 1.0).exited
            })
            .count();
        let freq = exits as f64 / n as f64;
        assert!((freq - oracle).abs() / oracle < 0.02, "{freq} vs {oracle}");
    }

    #[test]
    fn dyadic_partitions() {
        let m = two_point(1.0, 6.0, 0.5);
        let p = simulate(&m, &SimSpec::new(1.0, 8).with_levels(3), 12).unwrap();
        let p0 = RandomPartition::dyadic(&p, 0).unwrap();
        let grid0: Vec<f64> = p0
            .indices
            .iter()
            .filter(|&&i| !p.is_jump[i])
            .map(|&i| p.times[i])
            .collect();
        assert_eq!(grid0, (0..=8).map(|i| i as f64 / 8.0).collect::<Vec<_>>());
        let mut prev_mesh = p0.mesh();
        for n in 1..=3 {
            let pn = RandomPartition::dyadic(&p, n).unwrap();
            pn.check(&p).unwrap();
            assert!(pn.mesh() <= 0.125 / 2f64.powi(n as i32) + 1e-15);
            assert!(pn.mesh() <= prev_mesh);
            prev_mesh = pn.mesh();
            for j in &p.jumps {
                assert!(pn.times.contains(&j.time));
            }
        }
        assert!(RandomPartition::dyadic(&p, 4).is_err());
        assert!(matches!(
            RandomPartition::from_times(&p, &[0.0, 0.123456789]),
            Err(Error::PartitionPoint(_))
        ));
    }

    #[test]
    fn independent_pair_shares_nodes() {
        let mx = two_point(1.0, 3.0, 1.0);
        let my = LevyModel::compound_poisson(0.5, 4.0, JumpLaw::Uniform { a: 1.0 });
        let (x, y, s) = simulate_independent_pair(&mx, &my, &SimSpec::new(1.0, 16), 5, 0).unwrap();
        assert_eq!(x.times, y.times);
        assert_eq!(s.jumps.len(), x.jumps.len() + y.jumps.len());
        assert_eq!(s.qv_rate, 1.5);
        for i in 0..s.len() {
            assert_eq!(s.values[i], x.values[i] + y.values[i]);
        }
        // X alone is the same law but not the same draw as simulate_indexed,
        // because extra nodes consume extra normals.
        assert!(x.jumps.iter().all(|j| (j.right - j.left).abs() == 1.0));
    }
}
