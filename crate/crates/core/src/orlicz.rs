//! φ-moments, Luxemburg norms and the L¹ + L^∞ split on discrete measures.

use crate::convex::YoungFunction;
use crate::error::{Error, Result};

/// Finite weighted point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "total mass must be positive and finite, got {mass}"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Atoms 0..n with the given weights; used when only the weights matter.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let atoms = (0..weights.len()).map(|i| i as f64).collect();
        Self::new(atoms, weights)
    }

    /// Uniform probability measure on `n` atoms.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(vec![1.0 / n as f64; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Values of a function at the atoms of a [`DiscreteMeasure`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub values: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    fn check(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.values.len() != mu.len() {
            return Err(Error::LengthMismatch {
                left: self.values.len(),
                right: mu.len(),
            });
        }
        Ok(())
    }

    fn scaled_moment(&self, mu: &DiscreteMeasure, phi: &YoungFunction, k: f64) -> f64 {
        self.values
            .iter()
            .zip(mu.weights())
            .map(|(f, w)| if *w > 0.0 { w * phi.eval(f / k) } else { 0.0 })
            .sum()
    }
}

/// ∫ φ(f) dμ.
pub fn phi_moment(f: &WeightedSample, mu: &DiscreteMeasure, phi: &YoungFunction) -> Result<f64> {
    f.check(mu)?;
    Ok(f.scaled_moment(mu, phi, 1.0))
}

/// inf{K > 0 : ∫ φ(|f|/K) dμ ≤ 1}, by bisection until the bracket is
/// narrower than `tol·K`. The returned K always satisfies the constraint.
pub fn luxemburg_norm(
    f: &WeightedSample,
    mu: &DiscreteMeasure,
    phi: &YoungFunction,
    tol: f64,
) -> Result<f64> {
    f.check(mu)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let sup = f
        .values
        .iter()
        .zip(mu.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let m = |k: f64| f.scaled_moment(mu, phi, k);
    let mut hi = sup * mu.total_mass().max(1.0);
    while m(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while m(lo) <= 1.0 {
        lo *= 0.5;
    }
    // invariant: m(lo) > 1 ≥ m(hi)
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if m(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Result of [`decompose_l1_linf`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Large part, f·1[|f| ≥ λ₀‖f‖_φ].
    pub integrable: WeightedSample,
    /// Bounded part, |f_∞| < λ₀‖f‖_φ.
    pub bounded: WeightedSample,
    /// λ₀ = min{λ : φ(λ) ≥ λ}.
    pub threshold: f64,
    pub norm: f64,
}

/// Smallest positive λ with φ(λ) ≥ λ: scanned on a log grid then refined by
/// bisection on φ(λ) − λ.
pub fn crossing_point(phi: &YoungFunction) -> Result<f64> {
    let g = |l: f64| phi.eval(l) - l;
    let mut prev = 1e-12;
    let mut l = prev;
    for i in 0..=480 {
        l = 1e-12 * 10f64.powf(i as f64 / 20.0);
        if g(l) >= 0.0 {
            break;
        }
        prev = l;
    }
    if g(l) < 0.0 {
        return Err(Error::Degenerate(
            "φ(λ) < λ on the whole search grid".into(),
        ));
    }
    let (mut lo, mut hi) = (prev, l);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Splits f into an L¹ part and an L^∞ part relative to its Luxemburg norm.
pub fn decompose_l1_linf(
    f: &WeightedSample,
    mu: &DiscreteMeasure,
    phi: &YoungFunction,
) -> Result<Decomposition> {
    let norm = luxemburg_norm(f, mu, phi, 1e-14)?;
    if norm == 0.0 {
        return Err(Error::Degenerate("zero function has no decomposition".into()));
    }
    let threshold = crossing_point(phi)?;
    let (big, small): (Vec<f64>, Vec<f64>) = f
        .values
        .iter()
        .map(|&v| {
            if v.abs() / norm >= threshold {
                (v, 0.0)
            } else {
                (0.0, v)
            }
        })
        .unzip();
    Ok(Decomposition {
        integrable: WeightedSample::new(big),
        bounded: WeightedSample::new(small),
        threshold,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq() -> YoungFunction {
        YoungFunction::power(2.0).unwrap()
    }

    fn cube() -> YoungFunction {
        YoungFunction::power(3.0).unwrap()
    }

    #[test]
    fn moment_examples() {
        let mu = DiscreteMeasure::from_weights(vec![1.0, 1.0]).unwrap();
        let f = WeightedSample::new(vec![1.0, 2.0]);
        assert_eq!(phi_moment(&f, &mu, &sq()).unwrap(), 5.0);
        let f0 = WeightedSample::new(vec![0.0, 0.0]);
        assert_eq!(phi_moment(&f0, &mu, &sq()).unwrap(), 0.0);
        let mu = DiscreteMeasure::from_weights(vec![0.5]).unwrap();
        let f = WeightedSample::new(vec![3.0]);
        assert_eq!(phi_moment(&f, &mu, &cube()).unwrap(), 13.5);
    }

    #[test]
    fn mismatched_lengths() {
        let mu = DiscreteMeasure::from_weights(vec![1.0]).unwrap();
        let f = WeightedSample::new(vec![1.0, 2.0]);
        assert!(matches!(
            phi_moment(&f, &mu, &sq()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(DiscreteMeasure::new(vec![0.0], vec![]).is_err());
        assert!(DiscreteMeasure::from_weights(vec![0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::from_weights(vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn norm_matches_p_norm() {
        let mu = DiscreteMeasure::from_weights(vec![0.5, 0.5]).unwrap();
        let f = WeightedSample::new(vec![3.0, 4.0]);
        let n = luxemburg_norm(&f, &mu, &sq(), 1e-14).unwrap();
        assert!((n - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((n - 3.535534).abs() < 1e-6);
    }

    #[test]
    fn norm_of_zero() {
        let mu = DiscreteMeasure::from_weights(vec![0.5, 0.5]).unwrap();
        let f = WeightedSample::new(vec![0.0, 0.0]);
        assert_eq!(luxemburg_norm(&f, &mu, &sq(), 1e-10).unwrap(), 0.0);
        // values on null atoms are invisible
        let mu = DiscreteMeasure::from_weights(vec![0.0, 1.0]).unwrap();
        let f = WeightedSample::new(vec![7.0, 0.0]);
        assert_eq!(luxemburg_norm(&f, &mu, &sq(), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn norm_homogeneity() {
        let mu = DiscreteMeasure::from_weights(vec![0.2, 1.3, 0.7]).unwrap();
        let f = WeightedSample::new(vec![-1.0, 0.4, 2.2]);
        let g = WeightedSample::new(f.values.iter().map(|v| 2.5 * v).collect());
        for phi in [sq(), cube(), YoungFunction::power_log(2.0, 1.0).unwrap()] {
            let a = luxemburg_norm(&f, &mu, &phi, 1e-13).unwrap();
            let b = luxemburg_norm(&g, &mu, &phi, 1e-13).unwrap();
            assert!((b - 2.5 * a).abs() < 1e-11 * b);
        }
    }

    #[test]
    fn crossing_points() {
        assert!((crossing_point(&sq()).unwrap() - 1.0).abs() < 1e-14);
        assert!((crossing_point(&cube()).unwrap() - 1.0).abs() < 1e-14);
        // λ^1.5 log(e+λ) = λ ⇔ √λ log(e+λ) = 1
        let phi = YoungFunction::power_log(1.5, 1.0).unwrap();
        let l = crossing_point(&phi).unwrap();
        assert!((l.sqrt() * (std::f64::consts::E + l).ln() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let mu = DiscreteMeasure::from_weights(vec![0.5, 0.5]).unwrap();
        let f = WeightedSample::new(vec![0.5, 3.0]);
        let d = decompose_l1_linf(&f, &mu, &sq()).unwrap();
        // oracle: ‖f‖₂ = sqrt(0.5·0.25 + 0.5·9)
        assert!((d.norm - 4.625f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.integrable.values, vec![0.0, 3.0]);
        assert_eq!(d.bounded.values, vec![0.5, 0.0]);

        // bounded below the norm: nothing crosses λ₀ = 1
        let mu = DiscreteMeasure::from_weights(vec![1.0, 1.0, 1.0]).unwrap();
        let f = WeightedSample::new(vec![1.0, -1.0, 0.5]);
        let d = decompose_l1_linf(&f, &mu, &sq()).unwrap();
        assert!(f.values.iter().all(|v| v.abs() < d.norm));
        assert!(d.integrable.values.iter().all(|v| *v == 0.0));

        let zero = WeightedSample::new(vec![0.0; 3]);
        assert!(decompose_l1_linf(&zero, &mu, &sq()).is_err());
    }

    fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(0.01f64..2.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn unit_modular_at_the_norm((vals, w) in sample_strategy()) {
            prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
            let mu = DiscreteMeasure::from_weights(w).unwrap();
            let f = WeightedSample::new(vals);
            for phi in [sq(), cube(), YoungFunction::power_log(2.0, 1.0).unwrap()] {
                let n = luxemburg_norm(&f, &mu, &phi, 1e-14).unwrap();
                let scaled = WeightedSample::new(f.values.iter().map(|v| v / n).collect());
                let m = phi_moment(&scaled, &mu, &phi).unwrap();
                prop_assert!(m <= 1.0 + 1e-12);
                prop_assert!((m - 1.0).abs() < 1e-8);
            }
        }

        #[test]
        fn triangle_inequality((a, w) in sample_strategy(), seed in 0u64..1000) {
            let mu = DiscreteMeasure::from_weights(w).unwrap();
            let b: Vec<f64> = a.iter().enumerate()
                .map(|(i, v)| ((i as u64 * 7919 + seed) % 13) as f64 * 0.3 - v * 0.5)
                .collect();
            let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            for phi in [sq(), cube()] {
                let na = luxemburg_norm(&WeightedSample::new(a.clone()), &mu, &phi, 1e-13).unwrap();
                let nb = luxemburg_norm(&WeightedSample::new(b.clone()), &mu, &phi, 1e-13).unwrap();
                let ns = luxemburg_norm(&WeightedSample::new(s.clone()), &mu, &phi, 1e-13).unwrap();
                prop_assert!(ns <= na + nb + 1e-8);
            }
        }

        #[test]
        fn l1_embedding_on_probability_measures(vals in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let n = vals.len();
            let mu = DiscreteMeasure::uniform(n).unwrap();
            let f = WeightedSample::new(vals.clone());
            let l1: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            // tangent lines of a convex φ are affine minorants φ(λ) ≥ aλ − b
            for phi in [sq(), cube(), YoungFunction::power_log(2.0, 1.0).unwrap()] {
                let norm = luxemburg_norm(&f, &mu, &phi, 1e-13).unwrap();
                for &t in &[0.5, 1.0, 2.0] {
                    let a = phi.deriv(t);
                    let b = a * t - phi.eval(t);
                    let bound = (1.0 + b) / a;
                    prop_assert!(l1 <= bound * norm * (1.0 + 1e-10) + 1e-12);
                }
            }
        }

        #[test]
        fn decomposition_is_exact_split((vals, w) in sample_strategy()) {
            prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
            let mu = DiscreteMeasure::from_weights(w).unwrap();
            let f = WeightedSample::new(vals);
            let d = decompose_l1_linf(&f, &mu, &cube()).unwrap();
            for ((v, a), b) in f.values.iter().zip(&d.integrable.values).zip(&d.bounded.values) {
                prop_assert_eq!(*v, a + b);
                prop_assert!(b.abs() <= d.threshold * d.norm);
            }
        }
    }
}
