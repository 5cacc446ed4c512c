//! Exact oracles: discrete HMM forward/backward recursions, a scalar
//! Kalman filter, asymptotic-variance recursions for the particle
//! estimators, and contraction-based bounds. Everything here is
//! deterministic and used as ground truth by the statistical tests.

use crate::error::{Error, Result};
use crate::models::{DiscreteHmm, LinearGaussianModel};
use crate::ssm::{bayes_update, markov_propagate, DiscreteDensity};
use crate::util::normal_logpdf;

/// A scalar Gaussian filtering belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

/// Exact filter output: densities f_{t|t} for t = 0..T (index 0 is the
/// initial density, untouched by data), the per-step likelihood increments
/// p(y_t|y_{1:t-1}) in linear space, and the total log-likelihood.
#[derive(Debug, Clone)]
pub struct ExactFilterResult<D> {
    pub densities: Vec<D>,
    pub increments: Vec<f64>,
    pub log_likelihood: f64,
}

/// Forward recursion from an arbitrary starting density (used for
/// conditional likelihoods p(y_{s+1:t}|x_s or f_{s|s})).
pub fn hmm_forward_from(
    model: &DiscreteHmm,
    start: &DiscreteDensity,
    obs: &[usize],
) -> Result<ExactFilterResult<DiscreteDensity>> {
    let mut densities = Vec::with_capacity(obs.len() + 1);
    let mut increments = Vec::with_capacity(obs.len());
    let mut log_likelihood = 0.0;
    let mut f = start.clone();
    densities.push(f.clone());
    for (idx, &y) in obs.iter().enumerate() {
        let t = idx + 1;
        let pred = markov_propagate(&f, model.transition())?;
        let b = model.likelihood_vector(y);
        let (post, norm) = bayes_update(&pred, &b)
            .map_err(|_| Error::ZeroProbabilityObservation { t })?;
        f = post;
        densities.push(f.clone());
        increments.push(norm);
        log_likelihood += norm.ln();
    }
    Ok(ExactFilterResult {
        densities,
        increments,
        log_likelihood,
    })
}

/// Exact HMM filter: alternate prediction and Bayes update over the
/// observations.
pub fn hmm_forward(model: &DiscreteHmm, obs: &[usize]) -> Result<ExactFilterResult<DiscreteDensity>> {
    hmm_forward_from(model, model.initial(), obs)
}

/// Exact smoothing marginals f_{t|T} for t = 0..T via the backward pass
/// over the filter densities.
pub fn hmm_smoother(model: &DiscreteHmm, obs: &[usize]) -> Result<Vec<DiscreteDensity>> {
    let fwd = hmm_forward(model, obs)?;
    let t_max = obs.len();
    let m = model.m();
    let mut out = vec![fwd.densities[t_max].clone()];
    for t in (0..t_max).rev() {
        let f_t = &fwd.densities[t];
        let next_smooth = &out[out.len() - 1];
        // backward kernel: p(x_t | x_{t+1}, y_{1:t}) proportional in x_t to
        // a(x_t, x_{t+1}) f_{t|t}(x_t)
        let mut marg = vec![0.0; m];
        for x_next in 0..m {
            let mut col: Vec<f64> = (0..m)
                .map(|x| model.transition().entry(x, x_next) * f_t.probs()[x])
                .collect();
            let norm: f64 = col.iter().sum();
            if norm == 0.0 {
                continue;
            }
            for c in col.iter_mut() {
                *c /= norm;
            }
            for x in 0..m {
                marg[x] += next_smooth.probs()[x_next] * col[x];
            }
        }
        out.push(DiscreteDensity::from_unnormalized(&marg)?);
    }
    out.reverse();
    Ok(out)
}

/// Exact pairwise smoothing distributions p(x_t = i, x_{t+1} = j | y_{1:T})
/// for t = 0..T-1, as row-major M×M matrices.
pub fn hmm_pairwise_smoother(model: &DiscreteHmm, obs: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
    let fwd = hmm_forward(model, obs)?;
    let smooth = hmm_smoother(model, obs)?;
    let m = model.m();
    let mut out = Vec::with_capacity(obs.len());
    for t in 0..obs.len() {
        let f_t = &fwd.densities[t];
        let mut joint = vec![vec![0.0; m]; m];
        for x_next in 0..m {
            let col: Vec<f64> = (0..m)
                .map(|x| model.transition().entry(x, x_next) * f_t.probs()[x])
                .collect();
            let norm: f64 = col.iter().sum();
            if norm == 0.0 {
                continue;
            }
            for x in 0..m {
                joint[x][x_next] = smooth[t + 1].probs()[x_next] * col[x] / norm;
            }
        }
        out.push(joint);
    }
    Ok(out)
}

/// Scalar Kalman filter. `increments` holds the linear-space Gaussian
/// predictive densities p(y_t|y_{1:t-1}); the log-likelihood is summed in
/// log space.
pub fn kalman_filter(
    model: &LinearGaussianModel,
    obs: &[f64],
) -> ExactFilterResult<GaussianBelief> {
    let mut densities = Vec::with_capacity(obs.len() + 1);
    let mut increments = Vec::with_capacity(obs.len());
    let mut log_likelihood = 0.0;
    let mut mean = model.m0;
    let mut var = model.p0;
    densities.push(GaussianBelief {
        mean,
        variance: var,
    });
    for &y in obs {
        let pred_mean = model.phi * mean;
        let pred_var = model.phi * model.phi * var + model.q;
        let s = model.c * model.c * pred_var + model.r;
        let log_inc = normal_logpdf(y, model.c * pred_mean, s);
        let gain = pred_var * model.c / s;
        mean = pred_mean + gain * (y - model.c * pred_mean);
        var = (1.0 - gain * model.c) * pred_var;
        densities.push(GaussianBelief {
            mean,
            variance: var,
        });
        increments.push(log_inc.exp());
        log_likelihood += log_inc;
    }
    ExactFilterResult {
        densities,
        increments,
        log_likelihood,
    }
}

fn mean_under(f: &DiscreteDensity, psi: &[f64]) -> f64 {
    f.probs().iter().zip(psi).map(|(&p, &v)| p * v).sum()
}

fn variance_under(f: &DiscreteDensity, psi: &[f64]) -> f64 {
    let m = mean_under(f, psi);
    f.probs()
        .iter()
        .zip(psi)
        .map(|(&p, &v)| p * (v - m) * (v - m))
        .sum()
}

/// L_t psi (x') = Σ_x a(x', x) b(x, y_t) psi(x): a function of the previous
/// state.
fn l_operator(model: &DiscreteHmm, y: usize, psi: &[f64]) -> Vec<f64> {
    let m = model.m();
    let b = model.likelihood_vector(y);
    (0..m)
        .map(|xp| {
            (0..m)
                .map(|x| model.transition().entry(xp, x) * b[x] * psi[x])
                .sum()
        })
        .collect()
}

fn check_horizon(obs: &[usize], t: usize) -> Result<()> {
    if t > obs.len() {
        return Err(Error::InvalidParameter(format!(
            "t = {t} exceeds observation horizon {}",
            obs.len()
        )));
    }
    Ok(())
}

/// Asymptotic variance of sqrt(N)(M_{N,t}(psi) - m_t(psi)) for the filter
/// drawing i.i.d. particles each step, by the backward recursion
/// V_t(psi) = sigma_t^2(psi) + V_{t-1}(L_t(psi - m_t psi)) / p_t^2.
pub fn clt_variance_ar(model: &DiscreteHmm, obs: &[usize], psi: &[f64], t: usize) -> Result<f64> {
    check_horizon(obs, t)?;
    let fwd = hmm_forward(model, obs)?;
    clt_variance_ar_inner(model, obs, &fwd, psi, t)
}

fn clt_variance_ar_inner(
    model: &DiscreteHmm,
    obs: &[usize],
    fwd: &ExactFilterResult<DiscreteDensity>,
    psi: &[f64],
    t: usize,
) -> Result<f64> {
    if t == 0 {
        return Ok(variance_under(&fwd.densities[0], psi));
    }
    let f_t = &fwd.densities[t];
    let m_t = mean_under(f_t, psi);
    let sigma2 = variance_under(f_t, psi);
    let centered: Vec<f64> = psi.iter().map(|&v| v - m_t).collect();
    let pushed = l_operator(model, obs[t - 1], &centered);
    let p_t = fwd.increments[t - 1];
    if !(p_t > 0.0) {
        return Err(Error::ZeroProbabilityObservation { t });
    }
    Ok(sigma2 + clt_variance_ar_inner(model, obs, fwd, &pushed, t - 1)? / (p_t * p_t))
}

/// The same variance written as a closed sum: sigma_t^2(psi) plus, for
/// s = 1..t, sigma_{s-1}^2(L_{s:t} psi-bar) / p(y_{s:t}|y_{1:s-1})^2.
/// Returns (total, per-s summands for s = 1..t).
pub fn clt_variance_ar_summands(
    model: &DiscreteHmm,
    obs: &[usize],
    psi: &[f64],
    t: usize,
) -> Result<(f64, Vec<f64>)> {
    check_horizon(obs, t)?;
    let fwd = hmm_forward(model, obs)?;
    let m_t = mean_under(&fwd.densities[t], psi);
    let centered: Vec<f64> = psi.iter().map(|&v| v - m_t).collect();
    let mut summands = vec![0.0; t];
    let mut g = centered.clone(); // L_{s:t} psi-bar, built downward from s = t+1
    let mut tail_p = 1.0; // p(y_{s:t}|y_{1:s-1}) as the product of increments
    for s in (1..=t).rev() {
        g = l_operator(model, obs[s - 1], &g);
        tail_p *= fwd.increments[s - 1];
        if !(tail_p > 0.0) {
            return Err(Error::ZeroProbabilityObservation { t: s });
        }
        summands[s - 1] = variance_under(&fwd.densities[s - 1], &g) / (tail_p * tail_p);
    }
    let total = variance_under(&fwd.densities[t], psi) + summands.iter().sum::<f64>();
    Ok((total, summands))
}

/// Asymptotic variance of the multinomial-resampling filter estimator:
/// sigma_t^2(psi) plus, for s = 1..t,
/// m_s(b_s · (L_{s+1:t} psi-bar)^2) / (p(y_s|y_{1:s-1}) p(y_{s+1:t}|y_{1:s})^2).
/// Returns (total, per-s summands).
pub fn clt_variance_sir_summands(
    model: &DiscreteHmm,
    obs: &[usize],
    psi: &[f64],
    t: usize,
) -> Result<(f64, Vec<f64>)> {
    check_horizon(obs, t)?;
    let fwd = hmm_forward(model, obs)?;
    let m_t = mean_under(&fwd.densities[t], psi);
    let centered: Vec<f64> = psi.iter().map(|&v| v - m_t).collect();
    let mut summands = vec![0.0; t];
    let mut h = centered.clone(); // L_{s+1:t} psi-bar, identity at s = t
    let mut tail_p = 1.0; // p(y_{s+1:t}|y_{1:s})
    for s in (1..=t).rev() {
        let p_s = fwd.increments[s - 1];
        if !(p_s > 0.0) {
            return Err(Error::ZeroProbabilityObservation { t: s });
        }
        let b = model.likelihood_vector(obs[s - 1]);
        let num: f64 = fwd.densities[s]
            .probs()
            .iter()
            .enumerate()
            .map(|(x, &p)| p * b[x] * h[x] * h[x])
            .sum();
        summands[s - 1] = num / (p_s * tail_p * tail_p);
        // prepare s-1: extend the composition and the conditional tail
        h = l_operator(model, obs[s - 1], &h);
        tail_p *= p_s;
    }
    let total = variance_under(&fwd.densities[t], psi) + summands.iter().sum::<f64>();
    Ok((total, summands))
}

/// Total of [`clt_variance_sir_summands`].
pub fn clt_variance_sir(model: &DiscreteHmm, obs: &[usize], psi: &[f64], t: usize) -> Result<f64> {
    Ok(clt_variance_sir_summands(model, obs, psi, t)?.0)
}

/// Asymptotic cross-covariance of sqrt(N)(M_{N,r}(psi_r) - m_r(psi_r)) and
/// sqrt(N)(M_{N,t}(psi_t) - m_t(psi_t)) for r <= t under the i.i.d.-draw
/// filter: the later test function is pushed backward through
/// psi <- L_t(psi - m_t psi)/p_t until both live at time r, where the
/// bilinear form follows from the variance by polarization.
pub fn clt_cross_covariance(
    model: &DiscreteHmm,
    obs: &[usize],
    psi_r: &[f64],
    psi_t: &[f64],
    r: usize,
    t: usize,
) -> Result<f64> {
    check_horizon(obs, t)?;
    if r > t {
        return Err(Error::InvalidParameter("need r <= t".into()));
    }
    let fwd = hmm_forward(model, obs)?;
    let mut late = psi_t.to_vec();
    for s in (r + 1..=t).rev() {
        let m_s = mean_under(&fwd.densities[s], &late);
        let centered: Vec<f64> = late.iter().map(|&v| v - m_s).collect();
        let p_s = fwd.increments[s - 1];
        if !(p_s > 0.0) {
            return Err(Error::ZeroProbabilityObservation { t: s });
        }
        late = l_operator(model, obs[s - 1], &centered)
            .into_iter()
            .map(|v| v / p_s)
            .collect();
    }
    let sum: Vec<f64> = psi_r.iter().zip(&late).map(|(&a, &b)| a + b).collect();
    let v_sum = clt_variance_ar_inner(model, obs, &fwd, &sum, r)?;
    let v_a = clt_variance_ar_inner(model, obs, &fwd, psi_r, r)?;
    let v_b = clt_variance_ar_inner(model, obs, &fwd, &late, r)?;
    Ok((v_sum - v_a - v_b) / 2.0)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::VacuousBound);
    }
    Ok(())
}

/// Filter forgetting bound: gamma^{-1} (1 - gamma)^steps.
pub fn forgetting_bound(gamma: f64, steps: usize) -> Result<f64> {
    check_gamma(gamma)?;
    Ok((1.0 - gamma).powi(steps as i32) / gamma)
}

/// Uniform-in-time variance bound for bounded test functions:
/// gamma^{-3} (sup psi - inf psi)^2.
pub fn variance_bound_bounded_psi(gamma: f64, psi_range: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(psi_range * psi_range / (gamma * gamma * gamma))
}

/// Brute-force path enumeration over a discrete HMM; the independent
/// ground truth for the recursive oracles and the particle machinery.
pub mod enumerate {
    use super::*;

    fn for_each_path(m: usize, len: usize, mut f: impl FnMut(&[usize], f64, &DiscreteHmm, &[usize]), model: &DiscreteHmm, obs: &[usize]) {
        let total = m.pow(len as u32);
        let mut path = vec![0usize; len];
        for code in 0..total {
            let mut c = code;
            for slot in path.iter_mut() {
                *slot = c % m;
                c /= m;
            }
            let mut w = model.initial().probs()[path[0]];
            for t in 1..len {
                w *= model.transition().entry(path[t - 1], path[t])
                    * model.emission_prob(path[t], obs[t - 1]);
            }
            f(&path, w, model, obs);
        }
    }

    /// p(y_{1:T}) by summing the joint weight of every state path.
    pub fn likelihood(model: &DiscreteHmm, obs: &[usize]) -> f64 {
        let mut total = 0.0;
        for_each_path(
            model.m(),
            obs.len() + 1,
            |_, w, _, _| total += w,
            model,
            obs,
        );
        total
    }

    /// Filtering marginal f_{t|t} from paths over x_{0:t} and y_{1:t} only.
    pub fn filter_marginal(model: &DiscreteHmm, obs: &[usize], t: usize) -> Result<DiscreteDensity> {
        let mut marg = vec![0.0; model.m()];
        for_each_path(
            model.m(),
            t + 1,
            |path, w, _, _| marg[path[t]] += w,
            model,
            &obs[..t],
        );
        DiscreteDensity::from_unnormalized(&marg)
    }

    /// Smoothing marginal f_{t|T} from full paths.
    pub fn smoother_marginal(
        model: &DiscreteHmm,
        obs: &[usize],
        t: usize,
    ) -> Result<DiscreteDensity> {
        let mut marg = vec![0.0; model.m()];
        for_each_path(
            model.m(),
            obs.len() + 1,
            |path, w, _, _| marg[path[t]] += w,
            model,
            obs,
        );
        DiscreteDensity::from_unnormalized(&marg)
    }

    /// Joint smoothing distribution of (x_t, x_{t+1}) given y_{1:T}.
    pub fn pairwise_smoother(
        model: &DiscreteHmm,
        obs: &[usize],
        t: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let m = model.m();
        let mut joint = vec![vec![0.0; m]; m];
        let mut total = 0.0;
        for_each_path(
            m,
            obs.len() + 1,
            |path, w, _, _| {
                joint[path[t]][path[t + 1]] += w;
                total += w;
            },
            model,
            obs,
        );
        if !(total > 0.0) {
            return Err(Error::ZeroPosteriorMass);
        }
        for row in joint.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(joint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hmm2, DiscreteHmm};
    use crate::ssm::{l1_distance, TransitionKernel};

    #[test]
    fn hmm_forward_base_case_and_uniform() {
        let m = hmm2();
        let res = hmm_forward(&m, &[]).unwrap();
        assert_eq!(res.densities.len(), 1);
        assert_eq!(res.densities[0], *m.initial());
        assert_eq!(res.log_likelihood, 0.0);

        // uniform transitions and constant emissions keep the filter uniform
        let flat = DiscreteHmm::new(
            DiscreteDensity::uniform(3),
            TransitionKernel::new(vec![vec![1.0 / 3.0; 3]; 3]).unwrap(),
            vec![vec![0.5, 0.5]; 3],
        )
        .unwrap();
        let res = hmm_forward(&flat, &[0, 1, 0]).unwrap();
        for d in &res.densities {
            assert!(l1_distance(d, &DiscreteDensity::uniform(3)).unwrap() < 1e-14);
        }
    }

    #[test]
    fn hmm_forward_matches_enumeration() {
        let m = hmm2();
        let obs = [0usize, 1];
        let res = hmm_forward(&m, &obs).unwrap();
        for t in 0..=2 {
            let marg = enumerate::filter_marginal(&m, &obs, t).unwrap();
            assert!(l1_distance(&res.densities[t], &marg).unwrap() < 1e-12);
        }
        let lik = enumerate::likelihood(&m, &obs);
        assert!((res.log_likelihood - lik.ln()).abs() < 1e-12);
    }

    #[test]
    fn hmm_forward_flags_impossible_observation() {
        let m = DiscreteHmm::new(
            DiscreteDensity::uniform(2),
            TransitionKernel::new(vec![vec![0.5, 0.5]; 2]).unwrap(),
            vec![vec![1.0, 0.0]; 2],
        )
        .unwrap();
        match hmm_forward(&m, &[0, 1]) {
            Err(Error::ZeroProbabilityObservation { t }) => assert_eq!(t, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hmm_smoother_matches_enumeration() {
        let m = hmm2();
        let obs = [0usize, 1, 1];
        let smooth = hmm_smoother(&m, &obs).unwrap();
        for t in 0..=3 {
            let marg = enumerate::smoother_marginal(&m, &obs, t).unwrap();
            assert!(
                l1_distance(&smooth[t], &marg).unwrap() < 1e-12,
                "t = {t}: {:?} vs {:?}",
                smooth[t],
                marg
            );
        }
        // base case: last smoothing marginal is the last filter density
        let fwd = hmm_forward(&m, &obs).unwrap();
        assert!(l1_distance(&smooth[3], &fwd.densities[3]).unwrap() < 1e-14);
    }

    #[test]
    fn hmm_pairwise_matches_enumeration() {
        let m = hmm2();
        let obs = [1usize, 0, 1];
        let pair = hmm_pairwise_smoother(&m, &obs).unwrap();
        for t in 0..obs.len() {
            let exact = enumerate::pairwise_smoother(&m, &obs, t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (pair[t][i][j] - exact[i][j]).abs() < 1e-12,
                        "t = {t} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn smoother_with_constant_likelihood_is_prediction_chain() {
        let m = DiscreteHmm::new(
            DiscreteDensity::new(vec![0.7, 0.3]).unwrap(),
            TransitionKernel::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap(),
            vec![vec![0.5, 0.5]; 2],
        )
        .unwrap();
        let obs = [0usize, 0];
        let smooth = hmm_smoother(&m, &obs).unwrap();
        let fwd = hmm_forward(&m, &obs).unwrap();
        for t in 0..=2 {
            assert!(l1_distance(&smooth[t], &fwd.densities[t]).unwrap() < 1e-13);
        }
    }

    #[test]
    fn kalman_one_step_matches_hand_formulas() {
        let m = LinearGaussianModel::new(0.8, 0.3, 1.5, 0.7, 0.2, 0.9).unwrap();
        let y = 1.1;
        let res = kalman_filter(&m, &[y]);
        let pm = 0.8 * 0.2;
        let pv = 0.64 * 0.9 + 0.3;
        let s = 1.5 * 1.5 * pv + 0.7;
        let k = pv * 1.5 / s;
        let mean = pm + k * (y - 1.5 * pm);
        let var = (1.0 - k * 1.5) * pv;
        assert!((res.densities[1].mean - mean).abs() < 1e-12);
        assert!((res.densities[1].variance - var).abs() < 1e-12);
        assert!((res.increments[0] - normal_logpdf(y, 1.5 * pm, s).exp()).abs() < 1e-12);
    }

    #[test]
    fn kalman_uninformative_observations_follow_prediction() {
        let m = LinearGaussianModel::new(0.9, 0.0001, 1.0, 1e12, 1.0, 0.5).unwrap();
        let obs = vec![0.0; 5];
        let res = kalman_filter(&m, &obs);
        for t in 1..=5 {
            assert!(
                (res.densities[t].mean - 0.9f64.powi(t as i32)).abs() < 1e-6,
                "t = {t}"
            );
        }
    }

    #[test]
    fn kalman_static_parameter_posterior_variance() {
        let m = LinearGaussianModel::new(1.0, 1e-300, 1.0, 2.0, 0.0, 1.5).unwrap();
        let obs = vec![0.3, -0.4, 1.0, 0.2];
        let res = kalman_filter(&m, &obs);
        for t in 1..=4 {
            let expected = 1.0 / (1.0 / 1.5 + t as f64 / 2.0);
            assert!(
                (res.densities[t].variance - expected).abs() < 1e-9,
                "t = {t}"
            );
        }
    }

    #[test]
    fn clt_base_case_and_constant_psi() {
        let m = hmm2();
        let obs = [0usize, 1, 0];
        let v0 = clt_variance_ar(&m, &obs, &[1.0, 0.0], 0).unwrap();
        // variance of the indicator under the initial density (0.6, 0.4)
        assert!((v0 - 0.24).abs() < 1e-14);
        for t in 0..=3 {
            let v = clt_variance_ar(&m, &obs, &[2.5, 2.5], t).unwrap();
            assert!(v.abs() < 1e-12, "t = {t}: {v}");
            let v = clt_variance_sir(&m, &obs, &[2.5, 2.5], t).unwrap();
            assert!(v.abs() < 1e-12, "t = {t}: {v}");
        }
    }

    #[test]
    fn clt_recursion_matches_closed_sum() {
        let m = hmm2();
        let obs = [0usize, 1, 1, 0];
        let psi = [1.0, 0.0];
        for t in 0..=4 {
            let rec = clt_variance_ar(&m, &obs, &psi, t).unwrap();
            let (sum, _) = clt_variance_ar_summands(&m, &obs, &psi, t).unwrap();
            assert!((rec - sum).abs() < 1e-10, "t = {t}: {rec} vs {sum}");
        }
    }

    #[test]
    fn sir_summands_dominate_ar_summands() {
        let m = hmm2();
        let obs = [0usize, 1, 1, 0];
        let psi = [1.0, -0.5];
        for t in 1..=4 {
            let (v_ar, s_ar) = clt_variance_ar_summands(&m, &obs, &psi, t).unwrap();
            let (v_sir, s_sir) = clt_variance_sir_summands(&m, &obs, &psi, t).unwrap();
            for (a, b) in s_ar.iter().zip(&s_sir) {
                assert!(b + 1e-12 >= *a, "summand {b} < {a}");
            }
            assert!(v_sir + 1e-12 >= v_ar);
        }
    }

    #[test]
    fn cross_covariance_diagonal_is_variance() {
        let m = hmm2();
        let obs = [0usize, 1, 0];
        let psi = [0.3, 1.7];
        for t in 0..=3 {
            let v = clt_variance_ar(&m, &obs, &psi, t).unwrap();
            let c = clt_cross_covariance(&m, &obs, &psi, &psi, t, t).unwrap();
            assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(forgetting_bound(1.0, 3).unwrap(), 0.0);
        assert!((forgetting_bound(0.5, 3).unwrap() - 0.25).abs() < 1e-15);
        assert!((forgetting_bound(0.5, 0).unwrap() - 2.0).abs() < 1e-15);
        assert!(forgetting_bound(0.0, 1).is_err());
        assert_eq!(variance_bound_bounded_psi(1.0, 1.0).unwrap(), 1.0);
        assert!((variance_bound_bounded_psi(0.5, 2.0).unwrap() - 32.0).abs() < 1e-12);
        assert_eq!(variance_bound_bounded_psi(0.8, 0.0).unwrap(), 0.0);
        assert!(variance_bound_bounded_psi(-0.1, 1.0).is_err());
    }
}
