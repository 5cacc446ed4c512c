//! Accept-reject sampling from mixture-times-likelihood targets.
//!
//! The target has unnormalized density b(x) · Σ_j a(j, x): a finite mixture
//! of proposal components reweighted by a likelihood. Accepted draws are
//! exact samples, which is what lets the accept-reject filter produce i.i.d.
//! particles from the one-step posterior. All likelihood and envelope
//! bookkeeping is done in log space.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::ssm::DiscreteDensity;

/// Mixture-times-likelihood target: N components a(j, ·) given by a sampler
/// and a log-density evaluator, and a log-likelihood with optional known
/// log-supremum over x.
pub struct MixtureTarget<'a, X> {
    pub n_components: usize,
    pub sample_component: &'a dyn Fn(usize, &mut dyn RngCore) -> X,
    pub log_component_density: &'a dyn Fn(usize, &X) -> f64,
    pub log_likelihood: &'a dyn Fn(&X) -> f64,
    pub log_likelihood_sup: Option<f64>,
}

/// Auxiliary-index proposal: index distribution tau, per-index proposal
/// densities rho(j, ·) and per-index log envelopes
/// log M_j >= sup_x log( a(j,x) b(x) / rho(j,x) ).
pub struct AuxiliaryProposal<'a, X> {
    pub tau: DiscreteDensity,
    pub sample_rho: &'a dyn Fn(usize, &mut dyn RngCore) -> X,
    pub log_rho: &'a dyn Fn(usize, &X) -> f64,
    pub log_envelopes: Vec<f64>,
}

impl<'a, X> AuxiliaryProposal<'a, X> {
    /// log M = max_j (log M_j - log tau_j), the overall envelope constant.
    pub fn log_m_total(&self) -> f64 {
        self.log_envelopes
            .iter()
            .zip(self.tau.probs())
            .map(|(&lm, &t)| lm - t.ln())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const ENVELOPE_SLACK: f64 = 1e-9;

fn log_uniform(rng: &mut dyn RngCore) -> f64 {
    // Uniform on (0, 1); zero would make ln(u) = -inf and auto-accept,
    // which is harmless, but we keep the draw strictly positive.
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u.ln();
        }
    }
}

/// Rejection sampling with the prior mixture itself as proposal: draw an
/// index uniformly, a point from that component, and accept with
/// probability b(x) / sup b. Returns `count` i.i.d. draws from the target
/// together with the total number of proposals attempted.
pub fn accept_reject_prior<X>(
    target: &MixtureTarget<'_, X>,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<X>, u64)> {
    let log_sup = target.log_likelihood_sup.ok_or(Error::EnvelopeRequired)?;
    if !log_sup.is_finite() {
        return Err(Error::EnvelopeRequired);
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while out.len() < count {
        attempts += 1;
        let j = rng.gen_range(0..target.n_components);
        let x = (target.sample_component)(j, rng);
        let log_acc = (target.log_likelihood)(&x) - log_sup;
        if log_acc > ENVELOPE_SLACK {
            return Err(Error::EnvelopeViolated(log_acc.exp()));
        }
        if log_uniform(rng) < log_acc {
            out.push(x);
        }
    }
    Ok((out, attempts))
}

/// Rejection sampling with the mixture index as auxiliary variable:
/// draw (J, X) from tau_J · rho(J, ·), accept the pair with probability
/// a(J,X) b(X) / (M · tau_J · rho(J,X)), discard J. Accepted values are
/// exact draws from the target. An acceptance probability above one aborts
/// with an envelope-violation error rather than clamping.
pub fn accept_reject_aux<X>(
    prop: &AuxiliaryProposal<'_, X>,
    target: &MixtureTarget<'_, X>,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<X>, u64)> {
    if prop.tau.len() != target.n_components || prop.log_envelopes.len() != target.n_components {
        return Err(Error::DimensionMismatch(
            prop.tau.len(),
            target.n_components,
        ));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    let log_m = prop.log_m_total();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while out.len() < count {
        attempts += 1;
        let j = prop.tau.sample(rng);
        let x = (prop.sample_rho)(j, rng);
        let log_acc = (target.log_component_density)(j, &x) + (target.log_likelihood)(&x)
            - log_m
            - prop.tau.probs()[j].ln()
            - (prop.log_rho)(j, &x);
        if log_acc > ENVELOPE_SLACK {
            return Err(Error::EnvelopeViolated(log_acc.exp()));
        }
        if log_uniform(rng) < log_acc {
            out.push(x);
        }
    }
    Ok((out, attempts))
}

/// The acceptance-rate-optimal index distribution tau_j proportional to the
/// envelope constants M_j (linear scale).
pub fn optimal_tau(envelopes: &[f64]) -> Result<DiscreteDensity> {
    if envelopes.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidParameter(
            "all envelope constants must be positive".into(),
        ));
    }
    DiscreteDensity::from_unnormalized(envelopes)
}

/// `optimal_tau` for envelopes given in log scale; shift-invariant.
pub fn optimal_tau_log(log_envelopes: &[f64]) -> Result<DiscreteDensity> {
    let max = log_envelopes
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidParameter(
            "log envelopes must be finite".into(),
        ));
    }
    let lin: Vec<f64> = log_envelopes.iter().map(|&l| (l - max).exp()).collect();
    DiscreteDensity::from_unnormalized(&lin)
}

/// Proposal center for the stochastic volatility observation density:
/// minimizer of the quadratic upper bound on the log envelope, clamped to
/// the admissible range delta >= -1/2.
pub fn sv_proposal_center(m_j: f64, sigma2: f64, y: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("sigma2 must be positive".into()));
    }
    if y == 0.0 {
        return Err(Error::DegenerateObservation);
    }
    let log_y2 = (y * y).ln();
    let inner = 2.0 / (4.0 + sigma2) * (log_y2 - m_j);
    Ok(m_j + sigma2 / 2.0 * inner.max(-1.0))
}

/// Alternative proposal center: the classical second-order expansion of the
/// SV log-likelihood around the prior mean. No admissibility guarantee;
/// callers must check the resulting delta themselves.
pub fn sv_shephard_center(m_j: f64, sigma2: f64, y: f64) -> f64 {
    m_j + sigma2 / 2.0 * (y * y * (-m_j).exp() - 1.0)
}

/// Exact log envelope log M(j, theta) = sup_x log( a(j,x) b(x) / rho(theta,x) )
/// for Gaussian component a(j,·) = N(m_j, sigma2), unnormalized SV
/// likelihood b, and Gaussian proposal rho = N(theta, sigma2).
///
/// Requires delta = (theta - m_j)/sigma2 >= -1/2; at delta = -1/2 the
/// (1/2 + delta)·log(1 + 2 delta) term is taken as its limit 0, which also
/// covers the y = 0 extension where theta is clamped to m_j - sigma2/2.
pub fn sv_envelope(m_j: f64, theta: f64, sigma2: f64, y: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("sigma2 must be positive".into()));
    }
    let delta = (theta - m_j) / sigma2;
    if delta < -0.5 - 1e-12 {
        return Err(Error::ProposalBelowRange(delta));
    }
    let half = (0.5 + delta).max(0.0);
    let at_boundary = half < 1e-12;
    if y == 0.0 && !at_boundary {
        return Err(Error::DegenerateObservation);
    }
    let mut v = sigma2 / 2.0 * delta * delta + m_j * delta;
    if !at_boundary {
        let log_y2 = (y * y).ln();
        v += -half * (1.0 + log_y2) + half * (1.0 + 2.0 * delta).ln();
    }
    Ok(v)
}

/// Balanced accept-reject: each round proposes one value from every
/// component simultaneously and accepts each independently with probability
/// b(x)/sup b; rounds repeat until at least `n` values are accepted.
/// Returns all accepted values and the number of rounds taken.
pub fn balanced_accept_reject<X>(
    target: &MixtureTarget<'_, X>,
    n: usize,
    round_cap: u64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<X>, u64)> {
    let log_sup = target.log_likelihood_sup.ok_or(Error::EnvelopeRequired)?;
    if !log_sup.is_finite() {
        return Err(Error::EnvelopeRequired);
    }
    if n == 0 || target.n_components != n {
        return Err(Error::InvalidParameter(
            "balanced accept-reject needs one component per requested draw".into(),
        ));
    }
    let mut accepted = Vec::with_capacity(n);
    let mut rounds = 0u64;
    while accepted.len() < n {
        rounds += 1;
        if rounds > round_cap {
            return Err(Error::AcceptanceStalled(round_cap));
        }
        for j in 0..n {
            let x = (target.sample_component)(j, rng);
            let log_acc = (target.log_likelihood)(&x) - log_sup;
            if log_acc > ENVELOPE_SLACK {
                return Err(Error::EnvelopeViolated(log_acc.exp()));
            }
            if log_uniform(rng) < log_acc {
                accepted.push(x);
            }
        }
    }
    Ok((accepted, rounds))
}

/// Keeps exactly `n` of the values, dropping the excess uniformly at random
/// (partial Fisher-Yates).
pub fn trim_uniform<X>(mut values: Vec<X>, n: usize, rng: &mut dyn RngCore) -> Vec<X> {
    assert!(values.len() >= n);
    for i in 0..n {
        let j = rng.gen_range(i..values.len());
        values.swap(i, j);
    }
    values.truncate(n);
    values
}
