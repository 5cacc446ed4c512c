//! Particle filter drivers: sampling-importance-resampling steps,
//! accept-reject steps producing i.i.d. posterior draws, sequential
//! importance sampling with configurable resampling, likelihood estimation
//! and ESS diagnostics.

use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::models::{AuxCenter, Model};
use crate::reject::{accept_reject_prior, MixtureTarget};
use crate::resample::{
    multinomial_resample, residual_resample, systematic_resample, tree_resample,
    InclusionProbabilities, ResampleCounts,
};
use crate::rng::stream_rng;
use crate::ssm::WeightedParticleSystem;
use crate::util::log_sum_exp;

/// Which scheme converts inclusion probabilities into integer counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleScheme {
    Multinomial,
    Residual,
    #[default]
    Systematic,
    Tree,
}

impl ResampleScheme {
    pub fn draw(
        &self,
        pi: &InclusionProbabilities,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<ResampleCounts> {
        match self {
            ResampleScheme::Multinomial => multinomial_resample(pi, n, rng),
            ResampleScheme::Residual => residual_resample(pi, n, rng),
            ResampleScheme::Systematic => systematic_resample(pi, n, rng, true),
            ResampleScheme::Tree => tree_resample(pi, n, rng),
        }
    }
}

impl FromStr for ResampleScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(Self::Multinomial),
            "residual" => Ok(Self::Residual),
            "systematic" => Ok(Self::Systematic),
            "tree" => Ok(Self::Tree),
            other => Err(Error::InvalidParameter(format!(
                "unknown resampling scheme '{other}'"
            ))),
        }
    }
}

/// Which per-step sampler the filter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Sir,
    AcceptReject,
    AuxAcceptReject,
    Sis,
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sir" => Ok(Self::Sir),
            "accept-reject" => Ok(Self::AcceptReject),
            "aux-accept-reject" => Ok(Self::AuxAcceptReject),
            "sis" => Ok(Self::Sis),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampler '{other}'"
            ))),
        }
    }
}

/// Filter configuration. `r` is the proposal count per step for the SIR
/// sampler (r >= n); `resample_interval` applies to the SIS sampler only
/// (usize::MAX means never).
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub n: usize,
    pub r: usize,
    pub scheme: ResampleScheme,
    pub sampler: SamplerKind,
    pub resample_interval: usize,
    /// Optional adaptive trigger for SIS: resample when ESS < threshold * n.
    pub ess_threshold: Option<f64>,
    /// Use a separate multinomial ancestor pick instead of folding ancestor
    /// selection and resampling into one scheme-driven selection.
    pub two_stage_sir: bool,
    pub aux_center: AuxCenter,
    pub seed: u64,
    pub stream: u64,
}

impl FilterConfig {
    pub fn new(n: usize, sampler: SamplerKind, seed: u64) -> Self {
        Self {
            n,
            r: n,
            scheme: ResampleScheme::default(),
            sampler,
            resample_interval: 1,
            ess_threshold: None,
            two_stage_sir: false,
            aux_center: AuxCenter::default(),
            seed,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        if self.r < self.n {
            return Err(Error::InvalidParameter("r must be >= n".into()));
        }
        if self.resample_interval == 0 {
            return Err(Error::InvalidParameter(
                "resample_interval must be >= 1".into(),
            ));
        }
        if let Some(th) = self.ess_threshold {
            if !(0.0..=1.0).contains(&th) {
                return Err(Error::InvalidParameter(
                    "ess_threshold must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One filter step's outputs.
#[derive(Debug, Clone)]
pub struct StepRecord<S: Clone + PartialEq + std::fmt::Debug> {
    pub particles: WeightedParticleSystem<S>,
    pub log_increment: f64,
    pub ess: f64,
    pub accept_rate: Option<f64>,
    pub resampled: bool,
}

/// Full filter output: the time-0 particle system plus one record per
/// observation.
#[derive(Debug, Clone)]
pub struct FilterTrace<S: Clone + PartialEq + std::fmt::Debug> {
    pub initial: WeightedParticleSystem<S>,
    pub steps: Vec<StepRecord<S>>,
}

/// 1 / sum of squared weights for normalized weights; in [1, len].
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|&w| w * w).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        0.0
    }
}

fn normalized_from_log(logw: &[f64], t: usize) -> Result<Vec<f64>> {
    let total = log_sum_exp(logw);
    if !total.is_finite() {
        return Err(Error::FilterCollapse { t });
    }
    Ok(logw.iter().map(|&l| (l - total).exp()).collect())
}

/// One SIR step: propagate ancestors from the previous cloud through the
/// state transition, weight the proposals by the observation likelihood,
/// and select N of them with the configured scheme. The selection at the
/// end of a step already serves as the ancestor choice for the next one,
/// so an equal-weight cloud with R = N is propagated particle-by-particle;
/// only then does each step carry exactly one selection noise, which is
/// what the resampling variance recursion describes. The log likelihood
/// increment is log of the average proposal likelihood.
pub fn sir_step<M: Model>(
    prev: &WeightedParticleSystem<M::State>,
    model: &M,
    t: usize,
    y: &M::Obs,
    cfg: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<(WeightedParticleSystem<M::State>, f64)> {
    let uniform = prev
        .weights
        .iter()
        .all(|&w| (w - 1.0 / prev.len() as f64).abs() < 1e-12);
    let mut proposals = Vec::with_capacity(cfg.r);
    if uniform && cfg.r == prev.len() && !cfg.two_stage_sir {
        for v in &prev.values {
            proposals.push(model.sample_transition(t, v, rng));
        }
    } else {
        let pi_prev = InclusionProbabilities::from_weights(&prev.weights)?;
        let ancestors = if cfg.two_stage_sir {
            multinomial_resample(&pi_prev, cfg.r, rng)?
        } else {
            cfg.scheme.draw(&pi_prev, cfg.r, rng)?
        };
        for (i, &c) in ancestors.counts.iter().enumerate() {
            for _ in 0..c {
                proposals.push(model.sample_transition(t, &prev.values[i], rng));
            }
        }
    }
    let logb: Vec<f64> = proposals.iter().map(|z| model.log_obs(t, z, y)).collect();
    let log_increment = log_sum_exp(&logb) - (cfg.r as f64).ln();
    let w = normalized_from_log(&logb, t)?;
    let pi = InclusionProbabilities::from_weights(&w)?;
    let counts = cfg.scheme.draw(&pi, cfg.n, rng)?;
    let mut selected = Vec::with_capacity(cfg.n);
    for (k, &c) in counts.counts.iter().enumerate() {
        for _ in 0..c {
            selected.push(proposals[k].clone());
        }
    }
    Ok((
        WeightedParticleSystem::equal_weights(selected, prev.generation + 1),
        log_increment,
    ))
}

/// One accept-reject step: N i.i.d. draws from the one-step posterior
/// proportional to b_t(x, y) Σ_j a_t(x_j, x). Returns the new cloud, the
/// total proposals attempted, and the log likelihood increment.
pub fn ar_step<M: Model>(
    prev: &WeightedParticleSystem<M::State>,
    model: &M,
    t: usize,
    y: &M::Obs,
    cfg: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<(WeightedParticleSystem<M::State>, u64, f64)> {
    let n_prev = prev.len();
    let (values, attempts, log_scale) = match cfg.sampler {
        SamplerKind::AcceptReject => {
            let sample_component =
                |j: usize, rng: &mut dyn RngCore| model.sample_transition(t, &prev.values[j], rng);
            let log_component_density =
                |j: usize, x: &M::State| model.log_transition(t, &prev.values[j], x);
            let log_likelihood = |x: &M::State| model.log_obs(t, x, y);
            let log_sup = model.log_obs_sup(t, y).ok_or(Error::EnvelopeRequired)?;
            let target = MixtureTarget {
                n_components: n_prev,
                sample_component: &sample_component,
                log_component_density: &log_component_density,
                log_likelihood: &log_likelihood,
                log_likelihood_sup: Some(log_sup),
            };
            let (values, attempts) = accept_reject_prior(&target, cfg.n, rng)?;
            // average acceptance times sup b estimates the increment
            (values, attempts, log_sup)
        }
        SamplerKind::AuxAcceptReject => {
            let draw = model.aux_step(t, y, &prev.values, cfg.n, cfg.aux_center, rng)?;
            // the aux envelope constant replaces N·sup b
            (
                draw.values,
                draw.attempts,
                draw.log_m_total - (n_prev as f64).ln(),
            )
        }
        _ => {
            return Err(Error::Unsupported(
                "ar_step requires an accept-reject sampler".into(),
            ))
        }
    };
    // (count-1)/(attempts-1) is the unbiased acceptance-rate estimator for
    // a stopped sequence of Bernoulli proposals
    let acc_est = if attempts > values.len() as u64 {
        (values.len() as f64 - 1.0) / (attempts as f64 - 1.0)
    } else {
        1.0
    };
    let log_increment = acc_est.ln() + log_scale;
    Ok((
        WeightedParticleSystem::equal_weights(values, prev.generation + 1),
        attempts,
        log_increment,
    ))
}

/// Sequential importance sampling: propagate from the state model, carry
/// log-weights forward by adding log b_t, resample every
/// `resample_interval` steps (or when ESS drops below the optional
/// threshold).
pub fn sis_run<M: Model>(
    model: &M,
    obs: &[M::Obs],
    cfg: &FilterConfig,
    rng: &mut dyn RngCore,
) -> Result<FilterTrace<M::State>> {
    cfg.validate()?;
    let n = cfg.n;
    let mut values: Vec<M::State> = (0..n).map(|_| model.sample_initial(rng)).collect();
    let mut logw = vec![0.0f64; n];
    let initial = WeightedParticleSystem::equal_weights(values.clone(), 0);
    let mut steps = Vec::with_capacity(obs.len());
    for (idx, y) in obs.iter().enumerate() {
        let t = idx + 1;
        for v in values.iter_mut() {
            *v = model.sample_transition(t, v, rng);
        }
        let prev_total = log_sum_exp(&logw);
        for (l, v) in logw.iter_mut().zip(&values) {
            *l += model.log_obs(t, v, y);
        }
        let new_total = log_sum_exp(&logw);
        if !new_total.is_finite() {
            return Err(Error::FilterCollapse { t });
        }
        let log_increment = new_total - prev_total;
        // keep log-weights near zero so long horizons cannot underflow
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for l in logw.iter_mut() {
            *l -= m;
        }
        let w = normalized_from_log(&logw, t)?;
        let ess = effective_sample_size(&w);
        let due = cfg.resample_interval != usize::MAX && t % cfg.resample_interval == 0;
        let triggered = cfg.ess_threshold.is_some_and(|th| ess < th * n as f64);
        let resampled = due || triggered;
        if resampled {
            let pi = InclusionProbabilities::from_weights(&w)?;
            let counts = cfg.scheme.draw(&pi, n, rng)?;
            let mut next = Vec::with_capacity(n);
            for (i, &c) in counts.counts.iter().enumerate() {
                for _ in 0..c {
                    next.push(values[i].clone());
                }
            }
            values = next;
            logw = vec![0.0; n];
        }
        let weights = if resampled {
            vec![1.0 / n as f64; n]
        } else {
            w.clone()
        };
        steps.push(StepRecord {
            particles: WeightedParticleSystem::new(values.clone(), weights, t)?,
            log_increment,
            ess,
            accept_rate: None,
            resampled,
        });
    }
    Ok(FilterTrace { initial, steps })
}

/// Runs the configured filter over the whole observation sequence.
/// Deterministic given (seed, stream).
pub fn run_filter<M: Model>(
    model: &M,
    obs: &[M::Obs],
    cfg: &FilterConfig,
) -> Result<FilterTrace<M::State>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    if cfg.sampler == SamplerKind::Sis {
        return sis_run(model, obs, cfg, &mut rng);
    }
    let values: Vec<M::State> = (0..cfg.n).map(|_| model.sample_initial(&mut rng)).collect();
    let mut current = WeightedParticleSystem::equal_weights(values.clone(), 0);
    let initial = current.clone();
    let mut steps = Vec::with_capacity(obs.len());
    for (idx, y) in obs.iter().enumerate() {
        let t = idx + 1;
        let record = match cfg.sampler {
            SamplerKind::Sir => {
                let (next, log_increment) = sir_step(&current, model, t, y, cfg, &mut rng)?;
                current = next;
                StepRecord {
                    particles: current.clone(),
                    log_increment,
                    ess: cfg.n as f64,
                    accept_rate: None,
                    resampled: true,
                }
            }
            SamplerKind::AcceptReject | SamplerKind::AuxAcceptReject => {
                let (next, attempts, log_increment) =
                    ar_step(&current, model, t, y, cfg, &mut rng)?;
                current = next;
                StepRecord {
                    particles: current.clone(),
                    log_increment,
                    ess: cfg.n as f64,
                    accept_rate: Some(cfg.n as f64 / attempts as f64),
                    resampled: false,
                }
            }
            SamplerKind::Sis => unreachable!(),
        };
        steps.push(record);
    }
    Ok(FilterTrace { initial, steps })
}

/// Sum of per-step log likelihood increments: log p̂(y_{1:T}).
pub fn likelihood_estimate<S: Clone + PartialEq + std::fmt::Debug>(
    trace: &FilterTrace<S>,
) -> Result<f64> {
    let mut total = 0.0;
    for s in &trace.steps {
        if !s.log_increment.is_finite() {
            return Err(Error::IncompleteTrace);
        }
        total += s.log_increment;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hmm2, DiscreteHmm};
    use crate::ssm::{DiscreteDensity, TransitionKernel};

    fn uniform_emission_hmm() -> DiscreteHmm {
        DiscreteHmm::new(
            DiscreteDensity::new(vec![0.5, 0.5]).unwrap(),
            TransitionKernel::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap(),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&vec![0.01; 100]) - 100.0).abs() < 1e-9);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0]), 1.0);
        let e = effective_sample_size(&[0.5, 0.25, 0.25]);
        assert!((e - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sir_constant_likelihood_increment_is_exact() {
        let m = uniform_emission_hmm();
        let cfg = FilterConfig::new(200, SamplerKind::Sir, 1);
        let trace = run_filter(&m, &[0, 1, 0], &cfg).unwrap();
        for s in &trace.steps {
            assert!((s.log_increment - 0.5f64.ln()).abs() < 1e-12);
        }
        assert!((likelihood_estimate(&trace).unwrap() - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ar_constant_likelihood_accepts_all() {
        let m = uniform_emission_hmm();
        let cfg = FilterConfig::new(150, SamplerKind::AcceptReject, 2);
        let trace = run_filter(&m, &[1, 0], &cfg).unwrap();
        for s in &trace.steps {
            assert_eq!(s.accept_rate, Some(1.0));
            assert!((s.log_increment - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn run_filter_is_deterministic() {
        let m = hmm2();
        for sampler in [SamplerKind::Sir, SamplerKind::AcceptReject, SamplerKind::Sis] {
            let cfg = FilterConfig::new(100, sampler, 9);
            let a = run_filter(&m, &[0, 1, 1, 0], &cfg).unwrap();
            let b = run_filter(&m, &[0, 1, 1, 0], &cfg).unwrap();
            for (sa, sb) in a.steps.iter().zip(&b.steps) {
                assert_eq!(sa.particles.values, sb.particles.values);
                assert_eq!(sa.log_increment, sb.log_increment);
            }
        }
    }

    #[test]
    fn sis_never_resample_constant_likelihood_keeps_equal_weights() {
        let m = uniform_emission_hmm();
        let mut cfg = FilterConfig::new(50, SamplerKind::Sis, 3);
        cfg.resample_interval = usize::MAX;
        let trace = run_filter(&m, &[0, 0, 1, 1], &cfg).unwrap();
        for s in &trace.steps {
            assert!(!s.resampled);
            assert!((s.ess - 50.0).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_collapse_is_reported() {
        // observation symbol 1 has zero probability in every state
        let m = DiscreteHmm::new(
            DiscreteDensity::new(vec![1.0]).unwrap(),
            TransitionKernel::identity(1),
            vec![vec![1.0, 0.0]],
        )
        .unwrap();
        let cfg = FilterConfig::new(10, SamplerKind::Sir, 0);
        match run_filter(&m, &[1], &cfg) {
            Err(Error::FilterCollapse { t }) => assert_eq!(t, 1),
            other => panic!("expected collapse, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = FilterConfig::new(0, SamplerKind::Sir, 0);
        assert!(cfg.validate().is_err());
        cfg.n = 10;
        cfg.r = 5;
        assert!(cfg.validate().is_err());
        cfg.r = 10;
        cfg.resample_interval = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scheme_and_sampler_parse() {
        assert_eq!(
            "systematic".parse::<ResampleScheme>().unwrap(),
            ResampleScheme::Systematic
        );
        assert!("bogus".parse::<ResampleScheme>().is_err());
        assert_eq!("sis".parse::<SamplerKind>().unwrap(), SamplerKind::Sis);
        assert!("bogus".parse::<SamplerKind>().is_err());
    }
}
