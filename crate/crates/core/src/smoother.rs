//! Monte Carlo backward smoothing: turns a stored filter history into N
//! draws from the joint smoothing distribution of x_{0:T}.
//!
//! Path j starts at the time-T filter particle j and walks backward; at
//! each interior step the new point is drawn by rejection from the density
//! proportional to a_{t+1}(x, next_j) · b_t(x, y_t) · Σ_i w_i a_t(x_i, x),
//! proposing from the weighted filter mixture at time t-1 and accepting
//! with the transition-times-likelihood ratio against its supremum. The
//! same index distribution is shared by all paths at a given time step.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filter::FilterTrace;
use crate::models::Model;
use crate::ssm::WeightedParticleSystem;

/// Joint smoothing draws: `trajectories[j]` is the j-th path x_{0:T}.
/// `attempts` counts every rejection proposal made, for cost accounting.
#[derive(Debug, Clone)]
pub struct SmoothingDraws<S> {
    pub trajectories: Vec<Vec<S>>,
    pub attempts: u64,
}

const STALL_CAP: u64 = 10_000_000;

/// Draws one point from the density proportional to
/// lik(x) · Σ_i w_i a(x_i, x): propose a component by weight, propagate,
/// accept with lik/sup.
fn mixture_reject<M: Model>(
    model: &M,
    t: usize,
    cloud: &WeightedParticleSystem<M::State>,
    log_lik: &dyn Fn(&M::State) -> f64,
    log_sup: f64,
    attempts: &mut u64,
    rng: &mut dyn RngCore,
) -> Result<M::State> {
    if !log_sup.is_finite() {
        return Err(Error::EnvelopeRequired);
    }
    let mut local: u64 = 0;
    loop {
        local += 1;
        *attempts += 1;
        if local > STALL_CAP {
            return Err(Error::AcceptanceStalled(STALL_CAP));
        }
        // weighted component pick; weights are normalized by construction
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut i = cloud.len() - 1;
        for (k, &w) in cloud.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                i = k;
                break;
            }
        }
        let x = model.sample_transition(t, &cloud.values[i], rng);
        let log_ratio = log_lik(&x) - log_sup;
        if log_ratio > 1e-9 {
            return Err(Error::EnvelopeViolated(log_ratio.exp()));
        }
        let v: f64 = rng.gen();
        if v > 0.0 && v.ln() < log_ratio {
            return Ok(x);
        }
    }
}

/// Backward smoothing over a stored filter history. `obs` must be the
/// sequence the trace was produced from.
pub fn backward_smooth<M: Model>(
    trace: &FilterTrace<M::State>,
    model: &M,
    obs: &[M::Obs],
    rng: &mut dyn RngCore,
) -> Result<SmoothingDraws<M::State>> {
    let t_max = trace.steps.len();
    if obs.len() != t_max {
        return Err(Error::DimensionMismatch(obs.len(), t_max));
    }
    let n = trace.initial.len();
    let cloud_at = |t: usize| -> &WeightedParticleSystem<M::State> {
        if t == 0 {
            &trace.initial
        } else {
            &trace.steps[t - 1].particles
        }
    };
    let mut attempts: u64 = 0;
    // paths built backward: endpoint is the time-T filter cloud itself
    let mut paths: Vec<Vec<M::State>> = cloud_at(t_max)
        .values
        .iter()
        .map(|v| vec![v.clone()])
        .collect();
    for t in (1..t_max).rev() {
        let prev_cloud = cloud_at(t - 1);
        let y = &obs[t - 1];
        for path in paths.iter_mut() {
            let next = path.last().unwrap().clone();
            let log_sup = model.log_smooth_envelope(t, &next, y)?;
            let log_lik = |x: &M::State| {
                model.log_transition(t + 1, x, &next) + model.log_obs(t, x, y)
            };
            let x = mixture_reject(model, t, prev_cloud, &log_lik, log_sup, &mut attempts, rng)?;
            path.push(x);
        }
    }
    if t_max >= 1 {
        // time 0: density proportional to a_1(x, next) a_0(x); the filter's
        // time-0 cloud is an exact sample from a_0, so it plays the mixture
        let initial = cloud_at(0);
        for path in paths.iter_mut() {
            let next = path.last().unwrap().clone();
            let log_sup = model.log_transition_sup(1, &next);
            let log_lik = |x: &M::State| model.log_transition(1, x, &next);
            // proposals come from a_0 directly rather than a transition push
            let mut local: u64 = 0;
            let x = loop {
                local += 1;
                attempts += 1;
                if local > STALL_CAP {
                    return Err(Error::AcceptanceStalled(STALL_CAP));
                }
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut i = initial.len() - 1;
                for (k, &w) in initial.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        i = k;
                        break;
                    }
                }
                let cand = initial.values[i].clone();
                let log_ratio = log_lik(&cand) - log_sup;
                if log_ratio > 1e-9 {
                    return Err(Error::EnvelopeViolated(log_ratio.exp()));
                }
                let v: f64 = rng.gen();
                if v > 0.0 && v.ln() < log_ratio {
                    break cand;
                }
            };
            path.push(x);
        }
    }
    for path in paths.iter_mut() {
        path.reverse();
        debug_assert_eq!(path.len(), t_max + 1);
    }
    debug_assert_eq!(paths.len(), n);
    Ok(SmoothingDraws {
        trajectories: paths,
        attempts,
    })
}
