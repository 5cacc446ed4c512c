//! Concrete state space models: discrete hidden Markov, scalar
//! linear-Gaussian, and stochastic volatility, plus forward simulation.
//!
//! All three expose the same interface: samplers and pointwise log-density
//! evaluators for the initial density, the transition kernel and the
//! observation likelihood, together with the suprema the rejection samplers
//! need for their envelopes. Observation densities are normalized; the
//! stochastic volatility likelihood is also available unnormalized via
//! [`sv_observation_loglik`].

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::reject::{
    accept_reject_aux, optimal_tau_log, sv_envelope, sv_proposal_center, sv_shephard_center,
    AuxiliaryProposal, MixtureTarget,
};
use crate::rng::stream_rng;
use crate::ssm::{DiscreteDensity, TransitionKernel};
use crate::util::{normal_logpdf, LOG_INV_SQRT_2PI};

/// Which proposal center the auxiliary rejection sampler uses for the
/// stochastic volatility model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuxCenter {
    /// Minimizer of the quadratic bound on the log envelope (sharp default).
    #[default]
    Optimized,
    /// The prior mean itself (delta = 0); envelope reduces to sup b.
    PriorMean,
    /// Second-order expansion center; benchmarking alternative.
    Shephard,
}

/// Output of one auxiliary accept-reject pass: the accepted states, the
/// total proposals attempted, and log M = max_j log(M_j / tau_j), the
/// envelope constant the likelihood-increment estimator needs.
#[derive(Debug, Clone)]
pub struct AuxDraw<X> {
    pub values: Vec<X>,
    pub attempts: u64,
    pub log_m_total: f64,
}

/// The state space model contract shared by the filters, smoothers and
/// exact oracles. Time indices: states x_0..x_T, observations y_1..y_T;
/// `t` is the index of the observation/transition being evaluated.
pub trait Model {
    type State: Clone + PartialEq + std::fmt::Debug;
    type Obs: Clone + std::fmt::Debug;

    fn sample_initial(&self, rng: &mut dyn RngCore) -> Self::State;
    fn log_initial(&self, x: &Self::State) -> f64;

    fn sample_transition(&self, t: usize, prev: &Self::State, rng: &mut dyn RngCore)
        -> Self::State;
    fn log_transition(&self, t: usize, prev: &Self::State, next: &Self::State) -> f64;

    fn sample_obs(&self, t: usize, x: &Self::State, rng: &mut dyn RngCore) -> Self::Obs;
    /// Normalized log observation density log b_t(x, y).
    fn log_obs(&self, t: usize, x: &Self::State, y: &Self::Obs) -> f64;
    /// sup_x log b_t(x, y) when finite and known, else None.
    fn log_obs_sup(&self, t: usize, y: &Self::Obs) -> Option<f64>;

    /// sup_x log a_t(x, next); used by the backward smoother's base case.
    fn log_transition_sup(&self, t: usize, next: &Self::State) -> f64;

    /// sup_x [ log a_{t+1}(x, next) + log b_t(x, y) ]; the backward
    /// smoother's rejection envelope at interior steps.
    fn log_smooth_envelope(&self, t: usize, next: &Self::State, y: &Self::Obs) -> Result<f64>;

    /// One auxiliary accept-reject pass targeting
    /// b_t(x, y) Σ_j a_t(prev_j, x). Only models with a tailored proposal
    /// family implement this.
    fn aux_step(
        &self,
        _t: usize,
        _y: &Self::Obs,
        _prev: &[Self::State],
        _count: usize,
        _center: AuxCenter,
        _rng: &mut dyn RngCore,
    ) -> Result<AuxDraw<Self::State>> {
        Err(Error::Unsupported(
            "no auxiliary proposal family for this model".into(),
        ))
    }
}

/// Finite hidden Markov model with a finite observation alphabet.
#[derive(Debug, Clone)]
pub struct DiscreteHmm {
    initial: DiscreteDensity,
    transition: TransitionKernel,
    emission: Vec<Vec<f64>>,
    emission_rows: Vec<DiscreteDensity>,
}

impl DiscreteHmm {
    pub fn new(
        initial: DiscreteDensity,
        transition: TransitionKernel,
        emission: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if transition.m() != initial.len() || emission.len() != initial.len() {
            return Err(Error::DimensionMismatch(transition.m(), initial.len()));
        }
        let k = emission.first().map_or(0, Vec::len);
        if k == 0 || emission.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidDensity("ragged emission matrix".into()));
        }
        let emission_rows = emission
            .iter()
            .map(|r| DiscreteDensity::new(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial,
            transition,
            emission,
            emission_rows,
        })
    }

    pub fn m(&self) -> usize {
        self.initial.len()
    }

    /// Size of the observation alphabet.
    pub fn alphabet(&self) -> usize {
        self.emission[0].len()
    }

    pub fn initial(&self) -> &DiscreteDensity {
        &self.initial
    }

    pub fn transition(&self) -> &TransitionKernel {
        &self.transition
    }

    /// b(x, y) as a matrix entry.
    pub fn emission_prob(&self, x: usize, y: usize) -> f64 {
        self.emission[x][y]
    }

    /// The likelihood vector (b(0, y), ..., b(M-1, y)).
    pub fn likelihood_vector(&self, y: usize) -> Vec<f64> {
        self.emission.iter().map(|r| r[y]).collect()
    }

    fn transition_rows(&self) -> Vec<DiscreteDensity> {
        (0..self.m())
            .map(|i| DiscreteDensity::new(self.transition.row(i).to_vec()).unwrap())
            .collect()
    }
}

impl Model for DiscreteHmm {
    type State = usize;
    type Obs = usize;

    fn sample_initial(&self, rng: &mut dyn RngCore) -> usize {
        self.initial.sample(rng)
    }

    fn log_initial(&self, x: &usize) -> f64 {
        self.initial.probs()[*x].ln()
    }

    fn sample_transition(&self, _t: usize, prev: &usize, rng: &mut dyn RngCore) -> usize {
        // row densities are small; rebuilding per call would be wasteful,
        // but inverse-CDF on the raw row avoids the allocation entirely
        let row = self.transition.row(*prev);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        row.len() - 1
    }

    fn log_transition(&self, _t: usize, prev: &usize, next: &usize) -> f64 {
        self.transition.entry(*prev, *next).ln()
    }

    fn sample_obs(&self, _t: usize, x: &usize, rng: &mut dyn RngCore) -> usize {
        self.emission_rows[*x].sample(rng)
    }

    fn log_obs(&self, _t: usize, x: &usize, y: &usize) -> f64 {
        self.emission[*x][*y].ln()
    }

    fn log_obs_sup(&self, _t: usize, y: &usize) -> Option<f64> {
        let m = self
            .emission
            .iter()
            .map(|r| r[*y])
            .fold(f64::NEG_INFINITY, f64::max);
        Some(m.ln())
    }

    fn log_transition_sup(&self, _t: usize, next: &usize) -> f64 {
        (0..self.m())
            .map(|x| self.transition.entry(x, *next))
            .fold(f64::NEG_INFINITY, f64::max)
            .ln()
    }

    fn log_smooth_envelope(&self, _t: usize, next: &usize, y: &usize) -> Result<f64> {
        let m = (0..self.m())
            .map(|x| self.transition.entry(x, *next) * self.emission[x][*y])
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(m.ln())
    }
}

/// Scalar linear-Gaussian model:
/// X_t = phi X_{t-1} + sqrt(q) Z_t, Y_t = c X_t + sqrt(r) W_t,
/// X_0 ~ N(m0, p0).
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub phi: f64,
    pub q: f64,
    pub c: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

impl LinearGaussianModel {
    pub fn new(phi: f64, q: f64, c: f64, r: f64, m0: f64, p0: f64) -> Result<Self> {
        if !(q > 0.0) || !(r > 0.0) || !(p0 > 0.0) {
            return Err(Error::InvalidParameter(
                "q, r and p0 must be positive".into(),
            ));
        }
        Ok(Self {
            phi,
            q,
            c,
            r,
            m0,
            p0,
        })
    }
}

fn sample_normal(mean: f64, var: f64, rng: &mut dyn RngCore) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + var.sqrt() * z
}

impl Model for LinearGaussianModel {
    type State = f64;
    type Obs = f64;

    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64 {
        sample_normal(self.m0, self.p0, rng)
    }

    fn log_initial(&self, x: &f64) -> f64 {
        normal_logpdf(*x, self.m0, self.p0)
    }

    fn sample_transition(&self, _t: usize, prev: &f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(self.phi * prev, self.q, rng)
    }

    fn log_transition(&self, _t: usize, prev: &f64, next: &f64) -> f64 {
        normal_logpdf(*next, self.phi * prev, self.q)
    }

    fn sample_obs(&self, _t: usize, x: &f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(self.c * x, self.r, rng)
    }

    fn log_obs(&self, _t: usize, x: &f64, y: &f64) -> f64 {
        normal_logpdf(*y, self.c * x, self.r)
    }

    fn log_obs_sup(&self, _t: usize, y: &f64) -> Option<f64> {
        if self.c == 0.0 {
            // density does not depend on x
            Some(normal_logpdf(*y, 0.0, self.r))
        } else {
            // attained at x = y/c
            Some(LOG_INV_SQRT_2PI - 0.5 * self.r.ln())
        }
    }

    fn log_transition_sup(&self, _t: usize, next: &f64) -> f64 {
        if self.phi == 0.0 {
            normal_logpdf(*next, 0.0, self.q)
        } else {
            LOG_INV_SQRT_2PI - 0.5 * self.q.ln()
        }
    }

    fn log_smooth_envelope(&self, t: usize, next: &f64, y: &f64) -> Result<f64> {
        // log a(x, next) + log b(x, y) is quadratic in x; evaluate at the
        // stationary point of the exponent
        let curv = self.phi * self.phi / self.q + self.c * self.c / self.r;
        if curv == 0.0 {
            return Ok(self.log_transition(t + 1, &0.0, next) + self.log_obs(t, &0.0, y));
        }
        let x_star = (self.phi * next / self.q + self.c * y / self.r) / curv;
        Ok(self.log_transition(t + 1, &x_star, next) + self.log_obs(t, &x_star, y))
    }
}

/// Unnormalized stochastic volatility log-likelihood
/// log b(x, y) = -x/2 - (y^2/2) e^{-x}; the normalizing constant
/// (2 pi)^{-1/2} is fixed and handled separately.
pub fn sv_observation_loglik(x: f64, y: f64) -> f64 {
    -x / 2.0 - y * y / 2.0 * (-x).exp()
}

/// Stochastic volatility model: the state x is the log-variance, AR(1)
/// dynamics X_t = phi X_{t-1} + sigma Z_t, observation Y_t = e^{X_t/2} W_t.
/// The initial density is the stationary N(0, sigma^2/(1 - phi^2)).
#[derive(Debug, Clone)]
pub struct StochasticVolatilityModel {
    pub phi: f64,
    pub sigma2: f64,
    initial_var: f64,
}

impl StochasticVolatilityModel {
    pub fn new(phi: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter("sigma2 must be positive".into()));
        }
        if !(phi.abs() < 1.0) {
            return Err(Error::InvalidParameter(
                "|phi| < 1 required for a stationary initial density".into(),
            ));
        }
        let initial_var = sigma2 / (1.0 - phi * phi);
        Ok(Self {
            phi,
            sigma2,
            initial_var,
        })
    }

    /// Proposal center per component for the auxiliary sampler. `y = 0` is
    /// admissible only for centers that clamp delta to -1/2.
    fn center(&self, m_j: f64, y: f64, center: AuxCenter) -> Result<f64> {
        match center {
            AuxCenter::Optimized => {
                if y == 0.0 {
                    // delta clamped to -1/2; envelope finite by the limit
                    Ok(m_j - self.sigma2 / 2.0)
                } else {
                    sv_proposal_center(m_j, self.sigma2, y)
                }
            }
            AuxCenter::PriorMean => {
                if y == 0.0 {
                    // delta = 0 leaves sup b = infinity
                    Err(Error::DegenerateObservation)
                } else {
                    Ok(m_j)
                }
            }
            // delta = (y^2 e^{-m_j} - 1)/2 >= -1/2 always, so the exact
            // envelope applies to this center too
            AuxCenter::Shephard => Ok(sv_shephard_center(m_j, self.sigma2, y)),
        }
    }
}

impl Model for StochasticVolatilityModel {
    type State = f64;
    type Obs = f64;

    fn sample_initial(&self, rng: &mut dyn RngCore) -> f64 {
        sample_normal(0.0, self.initial_var, rng)
    }

    fn log_initial(&self, x: &f64) -> f64 {
        normal_logpdf(*x, 0.0, self.initial_var)
    }

    fn sample_transition(&self, _t: usize, prev: &f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(self.phi * prev, self.sigma2, rng)
    }

    fn log_transition(&self, _t: usize, prev: &f64, next: &f64) -> f64 {
        normal_logpdf(*next, self.phi * prev, self.sigma2)
    }

    fn sample_obs(&self, _t: usize, x: &f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(0.0, x.exp(), rng)
    }

    fn log_obs(&self, _t: usize, x: &f64, y: &f64) -> f64 {
        LOG_INV_SQRT_2PI + sv_observation_loglik(*x, *y)
    }

    fn log_obs_sup(&self, _t: usize, y: &f64) -> Option<f64> {
        if *y == 0.0 {
            // b(x, 0) = e^{-x/2} is unbounded over x
            None
        } else {
            // attained at x = log y^2
            Some(LOG_INV_SQRT_2PI - (1.0 + (y * y).ln()) / 2.0)
        }
    }

    fn log_transition_sup(&self, _t: usize, next: &f64) -> f64 {
        if self.phi == 0.0 {
            normal_logpdf(*next, 0.0, self.sigma2)
        } else {
            LOG_INV_SQRT_2PI - 0.5 * self.sigma2.ln()
        }
    }

    fn log_smooth_envelope(&self, _t: usize, next: &f64, y: &f64) -> Result<f64> {
        // g(x) = log a(x, next) + log b(x, y) is strictly concave
        // (g'' = -phi^2/sigma2 - (y^2/2) e^{-x} < 0 unless phi = 0, y = 0);
        // find the root of g' by bisection after bracketing
        let phi = self.phi;
        let s2 = self.sigma2;
        let y2 = y * y;
        let g = |x: f64| {
            normal_logpdf(*next, phi * x, s2) + LOG_INV_SQRT_2PI + sv_observation_loglik(x, *y)
        };
        let dg = |x: f64| phi * (next - phi * x) / s2 - 0.5 + y2 / 2.0 * (-x).exp();
        if phi == 0.0 && y2 == 0.0 {
            // g decreasing in -x/2 only: unbounded above
            return Err(Error::EnvelopeRequired);
        }
        // bracket: dg -> +inf as x -> -inf (y != 0) or is linear (y = 0)
        let mut lo = -1.0;
        let mut hi = 1.0;
        for _ in 0..200 {
            if dg(lo) > 0.0 {
                break;
            }
            lo = lo * 2.0 - 1.0;
        }
        for _ in 0..200 {
            if dg(hi) < 0.0 {
                break;
            }
            hi = hi * 2.0 + 1.0;
        }
        if !(dg(lo) > 0.0 && dg(hi) < 0.0) {
            return Err(Error::EnvelopeRequired);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dg(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (1.0 + hi.abs()) {
                break;
            }
        }
        let x_star = 0.5 * (lo + hi);
        // tiny additive safety against bisection truncation
        Ok(g(x_star) + 1e-9)
    }

    fn aux_step(
        &self,
        t: usize,
        y: &f64,
        prev: &[f64],
        count: usize,
        center: AuxCenter,
        rng: &mut dyn RngCore,
    ) -> Result<AuxDraw<f64>> {
        let n = prev.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty particle set".into()));
        }
        let means: Vec<f64> = prev.iter().map(|&x| self.phi * x).collect();
        let thetas: Vec<f64> = means
            .iter()
            .map(|&m_j| self.center(m_j, *y, center))
            .collect::<Result<Vec<_>>>()?;
        // envelopes in normalized scale: the closed form bounds the
        // unnormalized likelihood ratio, so add the constant back
        let log_envelopes: Vec<f64> = means
            .iter()
            .zip(&thetas)
            .map(|(&m_j, &th)| Ok(LOG_INV_SQRT_2PI + sv_envelope(m_j, th, self.sigma2, *y)?))
            .collect::<Result<Vec<_>>>()?;
        let tau = optimal_tau_log(&log_envelopes)?;

        let s2 = self.sigma2;
        let sample_component =
            |j: usize, rng: &mut dyn RngCore| sample_normal(means[j], s2, rng);
        let log_component_density = |j: usize, x: &f64| normal_logpdf(*x, means[j], s2);
        let log_likelihood = |x: &f64| self.log_obs(t, x, y);
        let target = MixtureTarget {
            n_components: n,
            sample_component: &sample_component,
            log_component_density: &log_component_density,
            log_likelihood: &log_likelihood,
            log_likelihood_sup: self.log_obs_sup(t, y),
        };
        let sample_rho = |j: usize, rng: &mut dyn RngCore| sample_normal(thetas[j], s2, rng);
        let log_rho = |j: usize, x: &f64| normal_logpdf(*x, thetas[j], s2);
        let prop = AuxiliaryProposal {
            tau,
            sample_rho: &sample_rho,
            log_rho: &log_rho,
            log_envelopes,
        };
        let log_m_total = prop.log_m_total();
        let (values, attempts) = accept_reject_aux(&prop, &target, count, rng)?;
        Ok(AuxDraw {
            values,
            attempts,
            log_m_total,
        })
    }
}

/// A simulated path x_{0:T} with observations y_{1:T}.
#[derive(Debug, Clone)]
pub struct Trajectory<M: Model> {
    pub states: Vec<M::State>,
    pub observations: Vec<M::Obs>,
    pub seed: u64,
}

/// Forward simulation: x_0 ~ a_0, x_t ~ a_t(x_{t-1}, ·), y_t ~ b_t(x_t, ·).
/// Deterministic given `seed` (simulation uses stream 0 of the seed).
pub fn simulate<M: Model>(model: &M, t_max: usize, seed: u64) -> Result<Trajectory<M>> {
    if t_max < 1 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut states = Vec::with_capacity(t_max + 1);
    let mut observations = Vec::with_capacity(t_max);
    states.push(model.sample_initial(&mut rng));
    for t in 1..=t_max {
        let next = model.sample_transition(t, states.last().unwrap(), &mut rng);
        observations.push(model.sample_obs(t, &next, &mut rng));
        states.push(next);
    }
    Ok(Trajectory {
        states,
        observations,
        seed,
    })
}

/// Two-state test model used across the suite.
pub fn hmm2() -> DiscreteHmm {
    DiscreteHmm::new(
        DiscreteDensity::new(vec![0.6, 0.4]).unwrap(),
        TransitionKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
        vec![vec![0.8, 0.2], vec![0.3, 0.7]],
    )
    .unwrap()
}

/// Three-state, four-symbol test model with strictly positive kernel
/// entries, so the contraction-condition machinery applies.
pub fn hmm3() -> DiscreteHmm {
    DiscreteHmm::new(
        DiscreteDensity::new(vec![0.5, 0.3, 0.2]).unwrap(),
        TransitionKernel::new(vec![
            vec![0.6, 0.25, 0.15],
            vec![0.2, 0.5, 0.3],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap(),
        vec![
            vec![0.5, 0.2, 0.2, 0.1],
            vec![0.1, 0.4, 0.3, 0.2],
            vec![0.2, 0.1, 0.3, 0.4],
        ],
    )
    .unwrap()
}

impl DiscreteHmm {
    /// Per-time-homogeneous transition rows as densities, for callers that
    /// want samplers per state.
    pub fn rows(&self) -> Vec<DiscreteDensity> {
        self.transition_rows()
    }
}
