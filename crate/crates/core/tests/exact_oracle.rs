//! The recursive oracles (forward filter, asymptotic-variance formulas,
//! uniform bounds) against brute-force path enumeration and Monte Carlo.

use rand::Rng;
use smc_core::exact::{
    clt_cross_covariance, clt_variance_ar, clt_variance_ar_summands, clt_variance_sir_summands,
    enumerate, hmm_forward, hmm_forward_from, variance_bound_bounded_psi,
};
use smc_core::filter::{run_filter, FilterConfig, SamplerKind};
use smc_core::models::{hmm2, hmm3, DiscreteHmm};
use smc_core::rng::stream_rng;
use smc_core::ssm::{kernel_ratio_bounds, l1_distance, DiscreteDensity, TransitionKernel};

fn random_hmm(m: usize, n_obs: usize, rng: &mut impl Rng) -> DiscreteHmm {
    let draw_pmf = |rng: &mut dyn rand::RngCore, len: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        let mut v: Vec<f64> = v.into_iter().map(|x| x / s).collect();
        let total: f64 = v.iter().sum();
        let last = v.len() - 1;
        v[last] += 1.0 - total;
        v
    };
    let initial = DiscreteDensity::new(draw_pmf(rng, m)).unwrap();
    let rows: Vec<Vec<f64>> = (0..m).map(|_| draw_pmf(rng, m)).collect();
    let emission: Vec<Vec<f64>> = (0..m).map(|_| draw_pmf(rng, n_obs)).collect();
    DiscreteHmm::new(initial, TransitionKernel::new(rows).unwrap(), emission).unwrap()
}

fn random_obs(n_obs: usize, len: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..n_obs)).collect()
}

#[test]
fn forward_recursion_matches_path_enumeration() {
    let mut rng = stream_rng(100, 0);
    for case in 0..30 {
        let m = 2 + case % 3;
        let len = if m == 2 { 6 } else { 4 };
        let model = random_hmm(m, 3, &mut rng);
        let obs = random_obs(3, len, &mut rng);
        let fwd = hmm_forward(&model, &obs).unwrap();
        let lik = enumerate::likelihood(&model, &obs);
        assert!(
            (fwd.log_likelihood.exp() - lik).abs() < 1e-12,
            "case {case}: {} vs {lik}",
            fwd.log_likelihood.exp()
        );
        for t in 0..=len {
            let marg = enumerate::filter_marginal(&model, &obs, t).unwrap();
            let d = l1_distance(&fwd.densities[t], &marg).unwrap();
            assert!(d < 1e-12, "case {case}, t = {t}: L1 = {d}");
        }
    }
}

#[test]
fn variance_recursion_equals_closed_sum() {
    let mut rng = stream_rng(101, 0);
    for case in 0..30 {
        let m = 2 + case % 3;
        let model = random_hmm(m, 3, &mut rng);
        let obs = random_obs(3, 6, &mut rng);
        let psi: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for t in 0..=6 {
            let rec = clt_variance_ar(&model, &obs, &psi, t).unwrap();
            let (sum, _) = clt_variance_ar_summands(&model, &obs, &psi, t).unwrap();
            assert!(
                (rec - sum).abs() < 1e-10 * (1.0 + rec.abs()),
                "case {case}, t = {t}: {rec} vs {sum}"
            );
        }
    }
}

#[test]
fn pushed_back_centered_function_has_zero_filter_mean() {
    // m_{t-1}(L_t(psi - m_t psi)) = 0: the one-step-ahead pushback of a
    // centered function is centered under the previous filter density.
    let mut rng = stream_rng(102, 0);
    for _ in 0..20 {
        let m = 2 + rng.gen_range(0usize..3);
        let model = random_hmm(m, 3, &mut rng);
        let obs = random_obs(3, 5, &mut rng);
        let psi: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fwd = hmm_forward(&model, &obs).unwrap();
        for t in 1..=5usize {
            let m_t: f64 = fwd.densities[t]
                .probs()
                .iter()
                .zip(&psi)
                .map(|(&p, &v)| p * v)
                .sum();
            let b = model.likelihood_vector(obs[t - 1]);
            let pushed: Vec<f64> = (0..m)
                .map(|xp| {
                    (0..m)
                        .map(|x| model.transition().entry(xp, x) * b[x] * (psi[x] - m_t))
                        .sum()
                })
                .collect();
            let mean_prev: f64 = fwd.densities[t - 1]
                .probs()
                .iter()
                .zip(&pushed)
                .map(|(&p, &v)| p * v)
                .sum();
            assert!(mean_prev.abs() < 1e-12, "t = {t}: {mean_prev}");
        }
    }
}

#[test]
fn multinomial_resampling_summands_dominate_iid_summands() {
    let mut rng = stream_rng(103, 0);
    for case in 0..30 {
        let m = 2 + case % 3;
        let model = random_hmm(m, 3, &mut rng);
        let obs = random_obs(3, 6, &mut rng);
        let psi: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, ar) = clt_variance_ar_summands(&model, &obs, &psi, 6).unwrap();
        let (_, sir) = clt_variance_sir_summands(&model, &obs, &psi, 6).unwrap();
        for s in 0..6 {
            assert!(
                sir[s] >= ar[s] - 1e-10 * (1.0 + ar[s].abs()),
                "case {case}, s = {}: {} < {}",
                s + 1,
                sir[s],
                ar[s]
            );
        }
    }
}

#[test]
fn variance_stays_below_uniform_mixing_bound() {
    let mut rng = stream_rng(104, 0);
    let mut checked = 0;
    for _ in 0..60 {
        let m = 2 + rng.gen_range(0usize..2);
        let model = random_hmm(m, 3, &mut rng);
        let bounds = kernel_ratio_bounds(model.transition()).unwrap();
        if bounds.violated || bounds.gamma < 0.2 {
            continue;
        }
        let obs = random_obs(3, 8, &mut rng);
        let psi: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let range = psi.iter().cloned().fold(f64::MIN, f64::max)
            - psi.iter().cloned().fold(f64::MAX, f64::min);
        let cap = variance_bound_bounded_psi(bounds.gamma, range).unwrap();
        for t in 1..=8 {
            let v = clt_variance_ar(&model, &obs, &psi, t).unwrap();
            assert!(v <= cap + 1e-12, "t = {t}: {v} > {cap}");
        }
        checked += 1;
    }
    assert!(checked >= 10, "too few admissible models: {checked}");
}

#[test]
fn conditional_tail_likelihood_ratio_bounded_by_mixing_rate() {
    // max_x p(y_{s+1:t} | x_s = x) / min_x p(y_{s+1:t} | x_s = x) <= 1/gamma
    let mut rng = stream_rng(105, 0);
    for (model, n_obs) in [(hmm2(), 2usize), (hmm3(), 4)] {
        let model = &model;
        let m = model.m();
        let gamma = kernel_ratio_bounds(model.transition()).unwrap().gamma;
        assert!(gamma > 0.0);
        for case in 0..20 {
            let obs = random_obs(n_obs, 6, &mut rng);
            let liks: Vec<f64> = (0..m)
                .map(|x| {
                    hmm_forward_from(model, &DiscreteDensity::point_mass(x, m), &obs)
                        .unwrap()
                        .log_likelihood
                        .exp()
                })
                .collect();
            let hi = liks.iter().cloned().fold(f64::MIN, f64::max);
            let lo = liks.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                hi / lo <= 1.0 / gamma + 1e-12,
                "case {case}: ratio {} > {}",
                hi / lo,
                1.0 / gamma
            );
        }
    }
}

#[test]
fn monte_carlo_moments_match_variance_and_cross_covariance_formulas() {
    let m = hmm2();
    let obs = [0usize, 1, 1];
    let psi = [1.0f64, 0.0];
    let fwd = hmm_forward(&m, &obs).unwrap();
    let m2 = fwd.densities[2].probs()[0];
    let m3 = fwd.densities[3].probs()[0];
    let n = 1_000usize;
    let reps = 4_000u64;
    let mut e2 = Vec::with_capacity(reps as usize);
    let mut e3 = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let cfg = FilterConfig::new(n, SamplerKind::AcceptReject, 70_000 + rep);
        let trace = run_filter(&m, &obs, &cfg).unwrap();
        let f = |x: &usize| if *x == 0 { 1.0 } else { 0.0 };
        e2.push((n as f64).sqrt() * (trace.steps[1].particles.weighted_mean(f) - m2));
        e3.push((n as f64).sqrt() * (trace.steps[2].particles.weighted_mean(f) - m3));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mu2, mu3) = (mean(&e2), mean(&e3));
    let var = |v: &[f64], mu: f64| {
        v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let (v2, v3) = (var(&e2, mu2), var(&e3, mu3));
    let cov = e2
        .iter()
        .zip(&e3)
        .map(|(a, b)| (a - mu2) * (b - mu3))
        .sum::<f64>()
        / (reps as f64 - 1.0);

    let v2_th = clt_variance_ar(&m, &obs, &psi, 2).unwrap();
    let v3_th = clt_variance_ar(&m, &obs, &psi, 3).unwrap();
    let cov_th = clt_cross_covariance(&m, &obs, &psi, &psi, 2, 3).unwrap();

    let r = reps as f64 - 1.0;
    assert!(
        (v2 - v2_th).abs() < 4.0 * v2_th * (2.0 / r).sqrt() + 0.05 * v2_th,
        "var t=2: {v2} vs {v2_th}"
    );
    assert!(
        (v3 - v3_th).abs() < 4.0 * v3_th * (2.0 / r).sqrt() + 0.05 * v3_th,
        "var t=3: {v3} vs {v3_th}"
    );
    let se_cov = ((v2 * v3 + cov * cov) / r).sqrt();
    assert!(
        (cov - cov_th).abs() < 4.0 * se_cov + 0.05 * cov_th.abs(),
        "cov: {cov} vs {cov_th} (se {se_cov})"
    );
}
