//! Core probabilistic operators on finite state spaces and the particle
//! system type shared by every filter.
//!
//! The operators here work in linear space on single steps; long-horizon
//! likelihood products are carried in log space by the `filter` module.

use rand::RngCore;

use crate::error::{Error, Result};

/// Absolute tolerance on probability sums. Inputs outside this tolerance
/// are rejected rather than silently renormalized, so numerical drift
/// stays visible.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// A probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    probs: Vec<f64>,
}

impl DiscreteDensity {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDensity("empty state space".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidDensity(format!("negative or NaN entry {p}")));
        }
        let sum: f64 = crate::util::compensated_sum(&probs);
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDensity(format!(
                "entries sum to {sum}, expected 1 within {PROB_SUM_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes a vector of nonnegative weights with positive total mass.
    pub fn from_unnormalized(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDensity("empty state space".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidDensity(format!("negative or NaN weight {w}")));
        }
        let total: f64 = crate::util::compensated_sum(weights);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroPosteriorMass);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(i: usize, m: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Categorical draw by inverse-CDF scan.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rand::Rng::gen(rng);
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// A row-stochastic transition matrix on a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    rows: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidDensity("empty kernel".into()));
        }
        for row in &rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch(row.len(), m));
            }
            DiscreteDensity::new(row.clone())?;
        }
        Ok(Self { rows })
    }

    pub fn identity(m: usize) -> Self {
        let rows = (0..m)
            .map(|i| {
                let mut r = vec![0.0; m];
                r[i] = 1.0;
                r
            })
            .collect();
        Self { rows }
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }
}

/// A particle cloud with normalized weights at one time index.
#[derive(Debug, Clone)]
pub struct WeightedParticleSystem<S> {
    pub values: Vec<S>,
    pub weights: Vec<f64>,
    /// Time index t of the particles.
    pub generation: usize,
}

impl<S> WeightedParticleSystem<S> {
    pub fn new(values: Vec<S>, weights: Vec<f64>, generation: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty particle system".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch(values.len(), weights.len()));
        }
        DiscreteDensity::new(weights.clone())?;
        Ok(Self {
            values,
            weights,
            generation,
        })
    }

    pub fn equal_weights(values: Vec<S>, generation: usize) -> Self {
        let n = values.len();
        Self {
            values,
            weights: vec![1.0 / n as f64; n],
            generation,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weighted_mean(&self, psi: impl Fn(&S) -> f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * psi(v))
            .sum()
    }
}

impl WeightedParticleSystem<usize> {
    /// Weighted state-occupancy pmf on a finite space of size `m`.
    pub fn occupancy(&self, m: usize) -> Result<DiscreteDensity> {
        let mut mass = vec![0.0; m];
        for (&v, &w) in self.values.iter().zip(&self.weights) {
            if v >= m {
                return Err(Error::InvalidParameter(format!(
                    "state {v} outside space of size {m}"
                )));
            }
            mass[v] += w;
        }
        DiscreteDensity::from_unnormalized(&mass)
    }
}

/// L1 distance between two densities on the same finite space.
/// Equals twice the total variation distance.
pub fn l1_distance(f: &DiscreteDensity, g: &DiscreteDensity) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch(f.len(), g.len()));
    }
    Ok(f.probs()
        .iter()
        .zip(g.probs())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Posterior and normalizer for prior `f` and pointwise likelihood `b`.
/// The normalizer is the one-step likelihood increment.
pub fn bayes_update(f: &DiscreteDensity, b: &[f64]) -> Result<(DiscreteDensity, f64)> {
    if f.len() != b.len() {
        return Err(Error::DimensionMismatch(f.len(), b.len()));
    }
    if let Some(v) = b.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "negative or NaN likelihood entry {v}"
        )));
    }
    let unnorm: Vec<f64> = f.probs().iter().zip(b).map(|(p, l)| p * l).collect();
    let normalizer = crate::util::compensated_sum(&unnorm);
    if !(normalizer > 0.0) {
        return Err(Error::ZeroPosteriorMass);
    }
    let posterior = DiscreteDensity::from_unnormalized(&unnorm)?;
    Ok((posterior, normalizer))
}

/// One-step prediction density f·K (row vector times matrix).
pub fn markov_propagate(f: &DiscreteDensity, k: &TransitionKernel) -> Result<DiscreteDensity> {
    if f.len() != k.m() {
        return Err(Error::DimensionMismatch(f.len(), k.m()));
    }
    let m = k.m();
    let mut out = vec![0.0; m];
    for (i, &p) in f.probs().iter().enumerate() {
        for (j, &a) in k.row(i).iter().enumerate() {
            out[j] += p * a;
        }
    }
    DiscreteDensity::new(out)
}

/// Dobrushin contraction coefficient: half the maximal L1 distance between
/// kernel rows. The Lipschitz constant of the Markov operator.
pub fn dobrushin_coefficient(k: &TransitionKernel) -> f64 {
    let m = k.m();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = k
                .row(i)
                .iter()
                .zip(k.row(j))
                .map(|(a, b)| (a - b).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    0.5 * worst
}

/// Expansion coefficient of the Bayes operator at prior `f` and
/// likelihood `b`: sup b over the normalizing integral.
pub fn bayes_expansion_coefficient(f: &DiscreteDensity, b: &[f64]) -> Result<f64> {
    if f.len() != b.len() {
        return Err(Error::DimensionMismatch(f.len(), b.len()));
    }
    let normalizer: f64 = f.probs().iter().zip(b).map(|(p, l)| p * l).sum();
    if !(normalizer > 0.0) {
        return Err(Error::ZeroPosteriorMass);
    }
    let sup = b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(sup / normalizer)
}

/// Two-sided density-ratio bounds of a kernel against the reference
/// density h built from its normalized column maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRatioBounds {
    pub c_lower: f64,
    pub c_upper: f64,
    /// gamma = c_lower / c_upper; the uniform forgetting rate is 1 - gamma.
    pub gamma: f64,
    /// Set when some kernel entry is zero where h is positive, in which
    /// case the two-sided bound fails and gamma is vacuous.
    pub violated: bool,
}

/// Computes the tightest `c·h <= a(x', ·) <= C·h` sandwich with h taken as
/// the normalized column maxima of the kernel.
pub fn kernel_ratio_bounds(k: &TransitionKernel) -> Result<KernelRatioBounds> {
    let m = k.m();
    let mut col_max = vec![0.0_f64; m];
    for i in 0..m {
        for j in 0..m {
            col_max[j] = col_max[j].max(k.entry(i, j));
        }
    }
    if col_max.iter().any(|&c| c <= 0.0) {
        return Err(Error::InvalidParameter(
            "kernel has an all-zero column".into(),
        ));
    }
    let total: f64 = col_max.iter().sum();
    let h: Vec<f64> = col_max.iter().map(|c| c / total).collect();

    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut violated = false;
    for i in 0..m {
        for j in 0..m {
            let ratio = k.entry(i, j) / h[j];
            if k.entry(i, j) == 0.0 {
                violated = true;
            }
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    if violated {
        lo = 0.0;
    }
    Ok(KernelRatioBounds {
        c_lower: lo,
        c_upper: hi,
        gamma: if hi > 0.0 { lo / hi } else { 0.0 },
        violated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(p: &[f64]) -> DiscreteDensity {
        DiscreteDensity::new(p.to_vec()).unwrap()
    }

    #[test]
    fn density_validation() {
        assert!(DiscreteDensity::new(vec![0.5, 0.5]).is_ok());
        assert!(DiscreteDensity::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDensity::new(vec![-0.1, 1.1]).is_err());
        assert!(DiscreteDensity::new(vec![]).is_err());
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&dd(&[0.5, 0.5]), &dd(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(l1_distance(&dd(&[1.0, 0.0]), &dd(&[0.0, 1.0])).unwrap(), 2.0);
        let d = l1_distance(&dd(&[0.5, 0.5]), &dd(&[0.8, 0.2])).unwrap();
        assert!((d - 0.6).abs() < 1e-15);
        assert!(l1_distance(&dd(&[1.0]), &dd(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn bayes_examples() {
        let (post, norm) = bayes_update(&dd(&[0.5, 0.5]), &[1.0, 1.0]).unwrap();
        assert_eq!(post.probs(), &[0.5, 0.5]);
        assert!((norm - 1.0).abs() < 1e-15);

        let (post, norm) = bayes_update(&dd(&[0.5, 0.5]), &[2.0, 1.0]).unwrap();
        assert!((post.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((post.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((norm - 1.5).abs() < 1e-15);

        assert!(matches!(
            bayes_update(&dd(&[1.0, 0.0]), &[0.0, 1.0]),
            Err(Error::ZeroPosteriorMass)
        ));
    }

    #[test]
    fn markov_examples() {
        let f = dd(&[1.0, 0.0]);
        let id = TransitionKernel::identity(2);
        assert_eq!(markov_propagate(&f, &id).unwrap().probs(), &[1.0, 0.0]);

        // rank-one kernel forgets the input entirely
        let h = vec![0.3, 0.7];
        let k = TransitionKernel::new(vec![h.clone(), h.clone()]).unwrap();
        let out = markov_propagate(&dd(&[0.9, 0.1]), &k).unwrap();
        assert!((out.probs()[0] - 0.3).abs() < 1e-15);

        let k = TransitionKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let out = markov_propagate(&dd(&[0.5, 0.5]), &k).unwrap();
        assert!((out.probs()[0] - 0.55).abs() < 1e-15);
        assert!((out.probs()[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn dobrushin_examples() {
        assert_eq!(dobrushin_coefficient(&TransitionKernel::identity(2)), 1.0);
        let h = vec![0.3, 0.7];
        let k = TransitionKernel::new(vec![h.clone(), h]).unwrap();
        assert_eq!(dobrushin_coefficient(&k), 0.0);
        let k = TransitionKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((dobrushin_coefficient(&k) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn expansion_examples() {
        let beta = bayes_expansion_coefficient(&dd(&[0.2, 0.8]), &[3.0, 3.0]).unwrap();
        assert!((beta - 1.0).abs() < 1e-15);
        let beta = bayes_expansion_coefficient(&dd(&[0.5, 0.5]), &[2.0, 1.0]).unwrap();
        assert!((beta - 4.0 / 3.0).abs() < 1e-15);
        let beta = bayes_expansion_coefficient(&dd(&[1.0, 0.0]), &[1.0, 100.0]).unwrap();
        assert!((beta - 100.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_bound_examples() {
        let h = vec![0.3, 0.7];
        let k = TransitionKernel::new(vec![h.clone(), h]).unwrap();
        let b = kernel_ratio_bounds(&k).unwrap();
        assert!(!b.violated);
        assert!((b.c_lower - 1.0).abs() < 1e-15 && (b.gamma - 1.0).abs() < 1e-15);

        let b = kernel_ratio_bounds(&TransitionKernel::identity(2)).unwrap();
        assert!(b.violated);
        assert_eq!(b.c_lower, 0.0);

        let k = TransitionKernel::new(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let b = kernel_ratio_bounds(&k).unwrap();
        assert!(!b.violated);
        assert!((b.gamma - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn occupancy_counts_weighted_mass() {
        let sys =
            WeightedParticleSystem::new(vec![0usize, 1, 1, 2], vec![0.25; 4], 0).unwrap();
        let occ = sys.occupancy(3).unwrap();
        assert_eq!(occ.probs(), &[0.25, 0.5, 0.25]);
    }
}
