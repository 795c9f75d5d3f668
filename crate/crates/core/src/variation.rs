//! Routes to the φ-variation V^φ(X).
//!
//! * discrete: φ(x₀) + Σ F_φ(x_{k−1}, x_k) on a sequence;
//! * definition: φ(X_T) − Σ φ′(X_{τ_k})(X_{τ_{k+1}} − X_{τ_k}) on a partition;
//! * pathwise: F_φ(0, X₀) + ½σ²∫φ″(X_{s−})ds + Σ_jumps F_φ(X_{s−}, X_s).
//!
//! The pathwise route uses the trapezoid rule between consecutive nodes, which
//! is exact when φ″ is constant.

use serde::Serialize;

use crate::convex::YoungFunction;
use crate::error::{Error, Result};
use crate::paths::{RandomPartition, SamplePath};

/// Running V^φ with its continuous and jump parts. The jump part includes
/// the initial term F_φ(0, X₀) = φ(X₀).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub cont: Vec<f64>,
    pub jump: Vec<f64>,
    pub initial: f64,
    /// Largest relative gap between the divergence form and the defining
    /// form (discrete route only; 0 otherwise).
    pub form_gap: f64,
}

impl VariationTrace {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("traces are nonempty")
    }

    pub fn continuous_term(&self) -> f64 {
        *self.cont.last().expect("traces are nonempty")
    }

    pub fn jump_term(&self) -> f64 {
        *self.jump.last().expect("traces are nonempty")
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0]) && self.values.iter().all(|v| *v >= 0.0)
    }

    /// Trace frozen after node `index`, sampled at `times` (which must extend
    /// the first `index + 1` times of this trace).
    pub fn stopped(&self, index: usize, times: &[f64]) -> VariationTrace {
        let n = times.len();
        let pick = |v: &Vec<f64>| -> Vec<f64> { (0..n).map(|i| v[i.min(index)]).collect() };
        VariationTrace {
            times: times.to_vec(),
            values: pick(&self.values),
            cont: pick(&self.cont),
            jump: pick(&self.jump),
            initial: self.initial,
            form_gap: self.form_gap,
        }
    }
}

/// V_n = φ(x₀) + Σ_{k ≤ n} F_φ(x_{k−1}, x_k), cross-checked against the
/// defining form φ(x_n) − Σ φ′(x_{k−1})(x_k − x_{k−1}).
pub fn discrete_variation(phi: &YoungFunction, x: &[f64]) -> Result<VariationTrace> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    let initial = phi.eval(x[0]);
    let mut values = Vec::with_capacity(x.len());
    let mut v = initial;
    let mut integral = 0.0;
    let mut gap: f64 = 0.0;
    values.push(v);
    for k in 1..x.len() {
        v += phi.bregman_divergence(x[k - 1], x[k])?;
        integral += phi.deriv(x[k - 1]) * (x[k] - x[k - 1]);
        let fx = phi.eval(x[k]);
        let defining = fx - integral;
        let scale = v.abs().max(fx.abs()).max(integral.abs()).max(1.0);
        gap = gap.max((defining - v).abs() / scale);
        values.push(v);
    }
    Ok(VariationTrace {
        times: (0..x.len()).map(|i| i as f64).collect(),
        cont: vec![0.0; x.len()],
        jump: values.clone(),
        values,
        initial,
        form_gap: gap,
    })
}

/// Left-endpoint sum Σ φ′(X_{τ_k})(X_{τ_{k+1}} − X_{τ_k}). The term from
/// X_{0−} = 0 to X₀ vanishes because φ′(0) = 0.
pub fn integral_partition_sum(
    phi: &YoungFunction,
    path: &SamplePath,
    partition: &RandomPartition,
) -> Result<f64> {
    partition.check(path)?;
    Ok(partition
        .indices
        .windows(2)
        .map(|w| {
            let (a, b) = (path.values[w[0]], path.values[w[1]]);
            phi.deriv(a) * (b - a)
        })
        .sum())
}

/// φ(X_T) − Σ φ′(X_{τ_k})ΔX over the partition.
pub fn variation_via_definition(
    phi: &YoungFunction,
    path: &SamplePath,
    partition: &RandomPartition,
) -> Result<f64> {
    let integral = integral_partition_sum(phi, path, partition)?;
    let last = *partition
        .indices
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty partition".into()))?;
    Ok(phi.eval(path.values[last]) - integral)
}

/// Definition route evaluated at every partition node. The jump column is
/// the exact Bregman jump sum; the continuous column is the remainder.
pub fn definition_trace(
    phi: &YoungFunction,
    path: &SamplePath,
    partition: &RandomPartition,
) -> Result<VariationTrace> {
    partition.check(path)?;
    if partition.is_empty() {
        return Err(Error::InvalidParameter("empty partition".into()));
    }
    let initial = phi.eval(path.initial());
    let mut integral = 0.0;
    let mut jump_sum = initial;
    let mut next_jump = 0;
    let n = partition.len();
    let (mut values, mut cont, mut jump) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, &i) in partition.indices.iter().enumerate() {
        if k > 0 {
            let a = path.values[partition.indices[k - 1]];
            integral += phi.deriv(a) * (path.values[i] - a);
        }
        while next_jump < path.jumps.len() && path.jumps[next_jump].time <= path.times[i] {
            let j = path.jumps[next_jump];
            jump_sum += phi.divergence(j.left, j.right);
            next_jump += 1;
        }
        let v = phi.eval(path.values[i]) - integral;
        values.push(v);
        jump.push(jump_sum);
        cont.push(v - jump_sum);
    }
    Ok(VariationTrace {
        times: partition.times.clone(),
        values,
        cont,
        jump,
        initial,
        form_gap: 0.0,
    })
}

/// V^φ(X)_t = F_φ(0, X₀) + ½σ²∫_0^{t∧q} φ″(X_{s−})ds + Σ_{0<s≤t} F_φ(X_{s−}, X_s),
/// where q is the time after which [X]^c stops growing.
pub fn pathwise_variation(phi: &YoungFunction, path: &SamplePath) -> Result<VariationTrace> {
    let n = path.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty path".into()));
    }
    let needs_second = path.qv_rate > 0.0;
    if needs_second && !phi.has_second_deriv() {
        return Err(Error::MissingSecondDerivative);
    }
    let half_rate = 0.5 * path.qv_rate;
    let initial = phi.divergence(0.0, path.values[0]);
    let (mut values, mut cont, mut jump) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut c = 0.0;
    let mut j = initial;
    let mut right_curv = if needs_second {
        phi.second_deriv(path.values[0])?
    } else {
        0.0
    };
    values.push(c + j);
    cont.push(c);
    jump.push(j);
    for i in 1..n {
        if needs_second {
            let left_curv = phi.second_deriv(path.left[i])?;
            if path.times[i] <= path.qv_until {
                let dt = path.times[i] - path.times[i - 1];
                c += half_rate * dt * 0.5 * (right_curv + left_curv);
            }
            right_curv = if path.is_jump[i] {
                phi.second_deriv(path.values[i])?
            } else {
                left_curv
            };
        }
        if path.is_jump[i] {
            j += phi.divergence(path.left[i], path.values[i]);
        }
        values.push(c + j);
        cont.push(c);
        jump.push(j);
    }
    Ok(VariationTrace {
        times: path.times.clone(),
        values,
        cont,
        jump,
        initial,
        form_gap: 0.0,
    })
}

/// Σ (X_{τ_{k+1}} − X_{τ_k})² over the partition.
pub fn realized_qv(path: &SamplePath, partition: &RandomPartition) -> Result<f64> {
    partition.check(path)?;
    Ok(partition
        .indices
        .windows(2)
        .map(|w| {
            let d = path.values[w[1]] - path.values[w[0]];
            d * d
        })
        .sum())
}
