//! Resampling schemes: multinomial, residual, systematic and tree-based,
//! plus the closed-form pair moment for systematic resampling.
//!
//! Every scheme maps inclusion probabilities (pi_1..pi_R) and a target size
//! N to integer counts (N_1..N_R) with E[N_j] = N pi_j and sum exactly N.
//! Systematic and tree-based counts additionally satisfy the support
//! restriction N_j in {floor(N pi_j), floor(N pi_j) + 1}.

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::util::compensated_sum;

/// Inclusion probabilities: nonnegative, summing to one within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionProbabilities {
    pi: Vec<f64>,
}

impl InclusionProbabilities {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::InvalidDensity("empty probability vector".into()));
        }
        if pi.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidDensity("negative or NaN probability".into()));
        }
        let total = compensated_sum(&pi);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { pi })
    }

    /// Normalizes nonnegative weights; errors when all are zero.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidDensity("negative or NaN weight".into()));
        }
        let total = compensated_sum(w);
        if !(total > 0.0) {
            return Err(Error::InvalidDensity("all weights are zero".into()));
        }
        let mut pi: Vec<f64> = w.iter().map(|&x| x / total).collect();
        // force an exact unit sum so downstream cumulative grids are clean
        let s = compensated_sum(&pi);
        let last = pi.len() - 1;
        pi[last] += 1.0 - s;
        if pi[last] < 0.0 {
            pi[last] = 0.0;
        }
        Ok(Self { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }
}

/// Integer multiplicities produced by a resampling scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleCounts {
    pub counts: Vec<usize>,
    pub n: usize,
}

impl ResampleCounts {
    fn checked(counts: Vec<usize>, n: usize) -> Self {
        debug_assert_eq!(counts.iter().sum::<usize>(), n);
        assert_eq!(counts.iter().sum::<usize>(), n, "counts must sum to N");
        Self { counts, n }
    }

    /// Expands counts into a list of selected indices (in index order).
    pub fn to_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (i, &c) in self.counts.iter().enumerate() {
            out.extend(std::iter::repeat(i).take(c));
        }
        out
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    Ok(())
}

/// Multinomial(N, pi) counts via sequential conditional binomials.
pub fn multinomial_resample(
    pi: &InclusionProbabilities,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ResampleCounts> {
    check_n(n)?;
    let r = pi.len();
    let mut counts = vec![0usize; r];
    let mut remaining = n as u64;
    let mut mass_left = 1.0f64;
    for i in 0..r {
        if remaining == 0 {
            break;
        }
        if i == r - 1 {
            counts[i] = remaining as usize;
            break;
        }
        let p = (pi.probs()[i] / mass_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        counts[i] = draw as usize;
        remaining -= draw;
        mass_left = (mass_left - pi.probs()[i]).max(0.0);
        if mass_left == 0.0 && remaining > 0 {
            // numerically exhausted mass: dump the rest on this index
            counts[i] += remaining as usize;
            remaining = 0;
        }
    }
    Ok(ResampleCounts::checked(counts, n))
}

/// Residual resampling: deterministic floors floor(N pi_i) plus a
/// multinomial allocation of the N' leftover draws over the fractional
/// parts.
pub fn residual_resample(
    pi: &InclusionProbabilities,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ResampleCounts> {
    check_n(n)?;
    let floors: Vec<usize> = pi.probs().iter().map(|&p| (n as f64 * p) as usize).collect();
    let assigned: usize = floors.iter().sum();
    let n_prime = n - assigned;
    if n_prime == 0 {
        return Ok(ResampleCounts::checked(floors, n));
    }
    let fracs: Vec<f64> = pi
        .probs()
        .iter()
        .zip(&floors)
        .map(|(&p, &f)| n as f64 * p - f as f64)
        .collect();
    let residual_pi = InclusionProbabilities::from_weights(&fracs)?;
    let extra = multinomial_resample(&residual_pi, n_prime, rng)?;
    let counts: Vec<usize> = floors
        .iter()
        .zip(&extra.counts)
        .map(|(&f, &e)| f + e)
        .collect();
    Ok(ResampleCounts::checked(counts, n))
}

/// Kahan cumulative sums of pi with the final entry forced to exactly 1.
fn unit_cumsum(pi: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(pi.len() + 1);
    cum.push(0.0);
    let mut sum = 0.0;
    let mut c = 0.0;
    for &p in pi {
        let y = p - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
        cum.push(sum);
    }
    *cum.last_mut().unwrap() = 1.0;
    cum
}

/// Systematic counts for a fixed offset u in [0, 1) and a fixed visit
/// order: the count for the k-th visited index is the number of integers
/// in [N·cum_{k-1} + u, N·cum_k + u). Exposed for the analytic tests that
/// integrate over u.
pub fn systematic_counts_with_u(
    pi: &InclusionProbabilities,
    n: usize,
    u: f64,
    order: &[usize],
) -> ResampleCounts {
    assert!((0.0..1.0).contains(&u));
    assert_eq!(order.len(), pi.len());
    let visited: Vec<f64> = order.iter().map(|&j| pi.probs()[j]).collect();
    let cum = unit_cumsum(&visited);
    let mut counts = vec![0usize; pi.len()];
    for (k, &j) in order.iter().enumerate() {
        let a = n as f64 * cum[k] + u;
        let b = n as f64 * cum[k + 1] + u;
        let c = (b.ceil() - a.ceil()) as i64;
        counts[j] = c.max(0) as usize;
    }
    ResampleCounts::checked(counts, n)
}

/// Systematic resampling: one uniform offset on a stride-1/N grid over the
/// cumulative probabilities, optionally after a uniform random permutation
/// of the visit order. Counts obey the support restriction
/// N_j in {floor(N pi_j), floor(N pi_j)+1}.
pub fn systematic_resample(
    pi: &InclusionProbabilities,
    n: usize,
    rng: &mut dyn RngCore,
    permute: bool,
) -> Result<ResampleCounts> {
    check_n(n)?;
    let r = pi.len();
    let mut order: Vec<usize> = (0..r).collect();
    if permute {
        for i in (1..r).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
    }
    let u: f64 = rng.gen();
    let out = systematic_counts_with_u(pi, n, u, &order);
    for (j, &c) in out.counts.iter().enumerate() {
        let mu = n as f64 * pi.probs()[j];
        assert!(
            (c as f64 - mu).abs() < 1.0 + 1e-6,
            "support restriction violated: count {c}, mean {mu}"
        );
    }
    Ok(out)
}

/// Integer floor and fractional part with snapping: fractions within 1e-9
/// of an integer are treated as exact, so float noise cannot flip a
/// deterministic split into a stochastic one.
fn floor_frac(mu: f64) -> (usize, f64) {
    let fl = mu.floor();
    let frac = mu - fl;
    if frac < 1e-9 {
        (fl as usize, 0.0)
    } else if frac > 1.0 - 1e-9 {
        (fl as usize + 1, 0.0)
    } else {
        (fl as usize, frac)
    }
}

/// Tree-based resampling: N units flow from the root of a balanced binary
/// tree down to the R leaves. Every node alpha receives
/// N_alpha in {floor(mu_alpha), floor(mu_alpha)+1} with E[N_alpha] =
/// mu_alpha = N·sum of pi over the node's leaves; split decisions at
/// distinct nodes are independent.
pub fn tree_resample(
    pi: &InclusionProbabilities,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ResampleCounts> {
    check_n(n)?;
    let cum = unit_cumsum(pi.probs());
    let mut counts = vec![0usize; pi.len()];
    // mean of the node covering leaves [lo, hi)
    let mu = |lo: usize, hi: usize| n as f64 * (cum[hi] - cum[lo]);
    // stack of (lo, hi, count); left child takes the larger half
    let mut stack = vec![(0usize, pi.len(), n)];
    while let Some((lo, hi, c)) = stack.pop() {
        if hi - lo == 1 {
            counts[lo] = c;
            continue;
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let (fll, fl) = floor_frac(mu(lo, mid));
        let (flr, fr) = floor_frac(mu(mid, hi));
        let extra = c as i64 - fll as i64 - flr as i64;
        let (cl, cr) = match extra {
            0 => (fll, flr),
            2 => (fll + 1, flr + 1),
            1 => {
                let p_left = if fl + fr < 1.0 {
                    // node count is the floor+1 branch of a non-carrying split
                    if fl + fr > 0.0 {
                        fl / (fl + fr)
                    } else {
                        0.5
                    }
                } else {
                    (1.0 - fr) / (2.0 - fl - fr)
                };
                let give_left = rng.gen::<f64>() < p_left;
                if give_left {
                    (fll + 1, flr)
                } else {
                    (fll, flr + 1)
                }
            }
            _ => unreachable!("node count outside support restriction"),
        };
        stack.push((lo, mid, cl));
        stack.push((mid, hi, cr));
    }
    for (j, &c) in counts.iter().enumerate() {
        let m = n as f64 * pi.probs()[j];
        assert!(
            (c as f64 - m).abs() < 1.0 + 1e-6,
            "support restriction violated: count {c}, mean {m}"
        );
    }
    Ok(ResampleCounts::checked(counts, n))
}

fn unit_interval(x: f64, name: &str) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "{name} = {x} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Closed-form E[M_j M_k] for systematic resampling with a fixed visit
/// order, where M_j = N_j - floor(N pi_j) is the excess indicator of index
/// j. Depends only on the fractional parts r_l (mass up to and including
/// j), r_m (mass strictly between j and k) and r_u (mass of k and beyond,
/// up to the next integer boundary). The covariance of the excess
/// indicators is this moment minus r_l·r_u.
pub fn systematic_pair_moment(r_l: f64, r_m: f64, r_u: f64) -> Result<f64> {
    unit_interval(r_l, "r_l")?;
    unit_interval(r_m, "r_m")?;
    unit_interval(r_u, "r_u")?;
    let v = if r_l + r_m + r_u > 2.0 {
        r_l + r_u - 1.0
    } else if r_l + r_m > 1.0 && r_m + r_u > 1.0 {
        1.0 - r_m
    } else if r_l + r_m > 1.0 {
        r_u
    } else if r_m + r_u > 1.0 {
        r_l
    } else {
        (r_l + r_m + r_u - 1.0).max(0.0)
    };
    Ok(v)
}

/// Cov(M_j, M_k) = E[M_j M_k] - r_l r_u under the same conventions.
pub fn systematic_pair_covariance(r_l: f64, r_m: f64, r_u: f64) -> Result<f64> {
    Ok(systematic_pair_moment(r_l, r_m, r_u)? - r_l * r_u)
}
