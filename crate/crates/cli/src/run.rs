//! Experiment execution: seeded simulation, replicated filter/smoother
//! runs, oracle check modes, and report assembly.

use std::path::Path;

use smc_core::exact::{clt_variance_ar, clt_variance_sir, hmm_forward};
use smc_core::filter::{likelihood_estimate, run_filter, ResampleScheme, SamplerKind};
use smc_core::models::{
    hmm2, hmm3, simulate, DiscreteHmm, LinearGaussianModel, Model, StochasticVolatilityModel,
};
use smc_core::resample::{
    multinomial_resample, residual_resample, systematic_counts_with_u, systematic_pair_covariance,
    systematic_pair_moment, systematic_resample, tree_resample, InclusionProbabilities,
};
use smc_core::rng::stream_rng;
use smc_core::smoother::backward_smooth;

use crate::config::{ExperimentConfig, Mode, ModelChoice};
use crate::report::{fmt_f64, write_csv, write_manifest};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("compute error: {0}")]
    Compute(#[from] smc_core::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Replicate k draws filter randomness from stream k + 1; stream 0 is
/// reserved for simulating the observations, and the smoother gets its
/// own block far above the replicate range.
const SMOOTHER_STREAM_BASE: u64 = 1_000_000;

/// Executes the configured mode, writing a CSV and a manifest into
/// `out_dir`. Returns the process exit code: 0 on success, 1 when a check
/// mode finds a mismatch beyond tolerance.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let (files, exit) = match cfg.mode {
        Mode::Filter | Mode::Smooth | Mode::Likelihood => (dispatch_particle_mode(cfg, out_dir)?, 0),
        Mode::CltCheck => clt_check(cfg, out_dir)?,
        Mode::ResampleCheck => resample_check(cfg, out_dir)?,
    };
    write_manifest(&out_dir.join("manifest.txt"), &cfg.echo(), cfg.seed, &files)?;
    Ok(exit)
}

fn dispatch_particle_mode(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>, RunError> {
    let psi = cfg.psi;
    match &cfg.model {
        ModelChoice::Hmm2 => {
            let m = hmm2();
            particle_modes(&m, cfg, out, &|x: &usize| psi.eval_discrete(*x))
        }
        ModelChoice::Hmm3 => {
            let m = hmm3();
            particle_modes(&m, cfg, out, &|x: &usize| psi.eval_discrete(*x))
        }
        ModelChoice::LinearGaussian {
            phi,
            q,
            c,
            r,
            m0,
            p0,
        } => {
            let m = LinearGaussianModel::new(*phi, *q, *c, *r, *m0, *p0)?;
            particle_modes(&m, cfg, out, &|x: &f64| psi.eval_continuous(*x))
        }
        ModelChoice::StochasticVolatility { phi, sigma2 } => {
            let m = StochasticVolatilityModel::new(*phi, *sigma2)?;
            particle_modes(&m, cfg, out, &|x: &f64| psi.eval_continuous(*x))
        }
    }
}

/// Runs indices 0..count across available threads, preserving order.
fn parallel_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(count.max(1));
    let mut results: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|tid| {
                let f = &f;
                s.spawn(move || {
                    let mut out = Vec::new();
                    let mut i = tid;
                    while i < count {
                        out.push((i, f(i)));
                        i += threads;
                    }
                    out
                })
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("replicate worker panicked") {
                results[i] = Some(v);
            }
        }
    });
    results.into_iter().map(|o| o.unwrap()).collect()
}

fn weighted_variance<S, F: Fn(&S) -> f64>(
    sys: &smc_core::ssm::WeightedParticleSystem<S>,
    f: &F,
) -> (f64, f64)
where
    S: Clone + PartialEq + std::fmt::Debug,
{
    let mean = sys.weighted_mean(|x| f(x));
    let var = sys.weighted_mean(|x| {
        let d = f(x) - mean;
        d * d
    });
    (mean, var)
}

fn particle_modes<M, F>(
    model: &M,
    cfg: &ExperimentConfig,
    out: &Path,
    psi: &F,
) -> Result<Vec<String>, RunError>
where
    M: Model + Sync,
    M::Obs: Sync,
    M::State: Send,
    F: Fn(&M::State) -> f64 + Sync,
{
    let obs = simulate(model, cfg.t, cfg.seed)?.observations;
    match cfg.mode {
        Mode::Filter => {
            let runs = parallel_map(cfg.replicates, |k| {
                run_filter(model, &obs, &cfg.filter_config(k as u64 + 1))
            });
            let mut files = Vec::new();
            for (k, trace) in runs.into_iter().enumerate() {
                let trace = trace?;
                let mut rows = Vec::with_capacity(cfg.t);
                for (i, step) in trace.steps.iter().enumerate() {
                    let (mean, var) = weighted_variance(&step.particles, psi);
                    rows.push(vec![
                        (i + 1).to_string(),
                        fmt_f64(mean),
                        fmt_f64(var),
                        fmt_f64(step.ess),
                        fmt_f64(step.log_increment),
                        step.accept_rate.map(fmt_f64).unwrap_or_default(),
                        usize::from(step.resampled).to_string(),
                    ]);
                }
                let name = format!("filter-rep{k:04}.csv");
                write_csv(
                    &out.join(&name),
                    "t,estimate_mean,estimate_var,ess,log_lik_increment,accept_rate,resampled",
                    &rows,
                )?;
                files.push(name);
            }
            Ok(files)
        }
        Mode::Likelihood => {
            let runs = parallel_map(cfg.replicates, |k| {
                run_filter(model, &obs, &cfg.filter_config(k as u64 + 1))
                    .and_then(|tr| likelihood_estimate(&tr))
            });
            let mut rows = Vec::new();
            for (k, ll) in runs.into_iter().enumerate() {
                rows.push(vec![k.to_string(), fmt_f64(ll?)]);
            }
            write_csv(&out.join("likelihood.csv"), "replicate,log_likelihood", &rows)?;
            Ok(vec!["likelihood.csv".to_string()])
        }
        Mode::Smooth => {
            let runs = parallel_map(cfg.replicates, |k| -> smc_core::Result<_> {
                let trace = run_filter(model, &obs, &cfg.filter_config(k as u64 + 1))?;
                let mut rng = stream_rng(cfg.seed, SMOOTHER_STREAM_BASE + k as u64);
                backward_smooth(&trace, model, &obs, &mut rng)
            });
            // pool the smoothed trajectories from every replicate
            let mut values: Vec<Vec<f64>> = vec![Vec::new(); cfg.t + 1];
            for draws in runs {
                for path in draws?.trajectories {
                    for (t, x) in path.iter().enumerate() {
                        values[t].push(psi(x));
                    }
                }
            }
            let mut rows = Vec::with_capacity(cfg.t + 1);
            for (t, vals) in values.iter().enumerate() {
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                rows.push(vec![
                    t.to_string(),
                    fmt_f64(mean),
                    fmt_f64(var),
                    vals.len().to_string(),
                ]);
            }
            write_csv(
                &out.join("smooth.csv"),
                "t,estimate_mean,estimate_var,paths",
                &rows,
            )?;
            Ok(vec!["smooth.csv".to_string()])
        }
        _ => unreachable!("check modes are handled separately"),
    }
}

/// Compares the asymptotic-variance formulas for the i.i.d.-draw and
/// multinomial-resampling filters against empirical replicate variances.
fn clt_check(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<String>, i32), RunError> {
    let model: DiscreteHmm = match cfg.model {
        ModelChoice::Hmm2 => hmm2(),
        ModelChoice::Hmm3 => hmm3(),
        _ => {
            return Err(RunError::Invalid(
                "clt-check requires a discrete model (hmm2 or hmm3)".to_string(),
            ))
        }
    };
    if cfg.replicates < 2 {
        return Err(RunError::Invalid(
            "clt-check needs experiment.replicates >= 2".to_string(),
        ));
    }
    let obs = simulate(&model, cfg.t, cfg.seed)?.observations;
    let psi_tab = cfg.psi.table(model.m());
    let fwd = hmm_forward(&model, &obs)?;
    let m_t: f64 = fwd.densities[cfg.t]
        .probs()
        .iter()
        .zip(&psi_tab)
        .map(|(&p, &v)| p * v)
        .sum();
    let theory = [
        ("iid", clt_variance_ar(&model, &obs, &psi_tab, cfg.t)?),
        ("multinomial", clt_variance_sir(&model, &obs, &psi_tab, cfg.t)?),
    ];
    let mut rows = Vec::new();
    let mut ok = true;
    for (name, v_theory) in theory {
        let sampler = if name == "iid" {
            SamplerKind::AcceptReject
        } else {
            SamplerKind::Sir
        };
        let psi = cfg.psi;
        let ests = parallel_map(cfg.replicates, |k| {
            let mut fc = cfg.filter_config(k as u64 + 1);
            fc.sampler = sampler;
            fc.scheme = ResampleScheme::Multinomial;
            run_filter(&model, &obs, &fc).map(|tr| {
                tr.steps[cfg.t - 1]
                    .particles
                    .weighted_mean(|x| psi.eval_discrete(*x))
            })
        });
        let mut scaled = Vec::with_capacity(cfg.replicates);
        for e in ests {
            scaled.push((cfg.n as f64).sqrt() * (e? - m_t));
        }
        let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
        let v_emp = scaled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (scaled.len() as f64 - 1.0);
        let ratio = v_emp / v_theory;
        if (v_emp - v_theory).abs() > 0.15 * v_theory {
            ok = false;
        }
        rows.push(vec![
            name.to_string(),
            fmt_f64(v_theory),
            fmt_f64(v_emp),
            fmt_f64(ratio),
        ]);
    }
    write_csv(
        &out.join("clt-check.csv"),
        "estimator,theoretical_variance,empirical_variance,ratio",
        &rows,
    )?;
    if !ok {
        eprintln!("clt-check: empirical variance differs from theory by more than 15%");
    }
    Ok((vec!["clt-check.csv".to_string()], i32::from(!ok)))
}

/// Exact pair moment of fixed-order systematic counts by piecewise
/// integration over the uniform offset.
fn pair_moment_by_integration(pi: &InclusionProbabilities, n: usize, j: usize, k: usize) -> f64 {
    let order: Vec<usize> = (0..pi.len()).collect();
    let mut cuts = vec![0.0f64, 1.0];
    let mut acc = 0.0;
    for &p in pi.probs() {
        acc += p;
        let c = n as f64 * acc;
        let u = c.ceil() - c;
        if u > 1e-12 && u < 1.0 - 1e-12 {
            cuts.push(u);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let floor_j = (n as f64 * pi.probs()[j] + 1e-9).floor();
    let floor_k = (n as f64 * pi.probs()[k] + 1e-9).floor();
    let mut moment = 0.0;
    for w in cuts.windows(2) {
        let counts = systematic_counts_with_u(pi, n, 0.5 * (w[0] + w[1]), &order);
        let mj = counts.counts[j] as f64 - floor_j;
        let mk = counts.counts[k] as f64 - floor_k;
        moment += mj * mk * (w[1] - w[0]);
    }
    moment
}

/// Average of the pair covariance over the in-between fractional mass,
/// integrated exactly over the piecewise-linear segments.
fn pair_covariance_rm_average(r_l: f64, r_u: f64) -> f64 {
    let mut cuts = vec![0.0f64, 1.0];
    for b in [2.0 - r_l - r_u, 1.0 - r_l - r_u, 1.0 - r_u, 1.0 - r_l] {
        if b > 1e-12 && b < 1.0 - 1e-12 {
            cuts.push(b);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    // the formula takes fractional parts in [0, 1); at the right endpoint
    // use the left limit (the covariance is continuous on each segment)
    let f = |r_m: f64| systematic_pair_covariance(r_l, r_m.min(1.0 - 1e-12), r_u).unwrap();
    cuts.windows(2)
        .map(|w| 0.5 * (f(w[0]) + f(w[1])) * (w[1] - w[0]))
        .sum()
}

/// Runs the resampling property suite and reports one pass/fail row per
/// check.
fn resample_check(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<String>, i32), RunError> {
    let pi = InclusionProbabilities::new(vec![0.3, 0.1, 0.25, 0.2, 0.15])?;
    let n = 7usize;
    let reps = 100_000u64;
    let r = pi.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut all_ok = true;
    let push = |rows: &mut Vec<Vec<String>>, name: &str, pass: bool| {
        rows.push(vec![name.to_string(), pass.to_string()]);
        pass
    };

    type Draw = fn(
        &InclusionProbabilities,
        usize,
        &mut dyn rand::RngCore,
    ) -> smc_core::Result<smc_core::resample::ResampleCounts>;
    let schemes: [(&str, Draw); 4] = [
        ("multinomial", |p, n, g| multinomial_resample(p, n, g)),
        ("residual", |p, n, g| residual_resample(p, n, g)),
        ("systematic", |p, n, g| systematic_resample(p, n, g, true)),
        ("tree", |p, n, g| tree_resample(p, n, g)),
    ];

    for (si, (name, draw)) in schemes.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, 10 + si as u64);
        let mut sums = vec![0.0f64; r];
        let mut sq = vec![0.0f64; r];
        let mut within_one = true;
        for _ in 0..reps {
            let c = draw(&pi, n, &mut rng)?;
            for j in 0..r {
                let cj = c.counts[j] as f64;
                sums[j] += cj;
                sq[j] += cj * cj;
                if (cj - n as f64 * pi.probs()[j]).abs() >= 1.0 + 1e-9 {
                    within_one = false;
                }
            }
        }
        let mut unbiased = true;
        for j in 0..r {
            let mean = sums[j] / reps as f64;
            let var = sq[j] / reps as f64 - mean * mean;
            let se = (var / reps as f64).sqrt();
            if (mean - n as f64 * pi.probs()[j]).abs() > 4.0 * se + 1e-12 {
                unbiased = false;
            }
        }
        all_ok &= push(&mut rows, &format!("{name}-unbiased"), unbiased);
        if *name == "systematic" || *name == "tree" {
            all_ok &= push(&mut rows, &format!("{name}-within-one"), within_one);
        }
    }

    // pairwise count covariances of the tree scheme are non-positive
    {
        let mut rng = stream_rng(cfg.seed, 20);
        let mut sums = vec![0.0f64; r];
        let mut cross = vec![vec![0.0f64; r]; r];
        for _ in 0..reps {
            let c = tree_resample(&pi, n, &mut rng)?;
            for i in 0..r {
                sums[i] += c.counts[i] as f64;
                for j in 0..r {
                    cross[i][j] += (c.counts[i] * c.counts[j]) as f64;
                }
            }
        }
        let se = 1.0 / (reps as f64).sqrt();
        let mut nonpositive = true;
        for i in 0..r {
            for j in 0..r {
                if i == j {
                    continue;
                }
                let cov = cross[i][j] / reps as f64
                    - (sums[i] / reps as f64) * (sums[j] / reps as f64);
                if cov > 4.0 * se {
                    nonpositive = false;
                }
            }
        }
        all_ok &= push(&mut rows, "tree-covariance-nonpositive", nonpositive);
    }

    // subset deviation tail bound for the tree scheme
    {
        let mut rng = stream_rng(cfg.seed, 21);
        let subsets: Vec<Vec<usize>> = vec![vec![0], vec![0, 2, 4], (0..r).collect()];
        let eps_grid = [0.5f64, 1.0, 1.5, 2.0];
        let mut exceed = vec![vec![0u64; eps_grid.len()]; subsets.len()];
        for _ in 0..reps {
            let c = tree_resample(&pi, n, &mut rng)?;
            for (si, set) in subsets.iter().enumerate() {
                let dev: f64 = set
                    .iter()
                    .map(|&j| c.counts[j] as f64 - n as f64 * pi.probs()[j])
                    .sum();
                for (ei, &eps) in eps_grid.iter().enumerate() {
                    if dev.abs() >= eps {
                        exceed[si][ei] += 1;
                    }
                }
            }
        }
        let mut held = true;
        for row in &exceed {
            for (ei, &hits) in row.iter().enumerate() {
                let p = hits as f64 / reps as f64;
                let eps = eps_grid[ei];
                let bound = 2.0 * (-4.0 * eps * eps / r as f64).exp();
                let se = (p * (1.0 - p) / reps as f64).sqrt();
                if p > bound + 4.0 * se + 1e-9 {
                    held = false;
                }
            }
        }
        all_ok &= push(&mut rows, "tree-subset-tail-bound", held);
    }

    // closed-form pair moment vs exact integration on a 9x9x9 grid
    {
        let mut agrees = true;
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        for &r_l in &grid {
            for &r_m in &grid {
                for &r_u in &grid {
                    let rest = 10.0 - r_l - r_m - r_u;
                    let probs = InclusionProbabilities::new(vec![
                        r_l / 10.0,
                        r_m / 10.0,
                        r_u / 10.0,
                        rest / 10.0,
                    ])?;
                    let exact = pair_moment_by_integration(&probs, 10, 0, 2);
                    let formula = systematic_pair_moment(r_l, r_m, r_u)?;
                    if (exact - formula).abs() > 1e-6 {
                        agrees = false;
                    }
                }
            }
        }
        all_ok &= push(&mut rows, "pair-moment-closed-form", agrees);

        let mut zero_mean = true;
        for &r_l in &grid {
            for &r_u in &grid {
                if pair_covariance_rm_average(r_l, r_u).abs() > 1e-6 {
                    zero_mean = false;
                }
            }
        }
        all_ok &= push(&mut rows, "pair-covariance-average-zero", zero_mean);
    }

    write_csv(&out.join("resample-check.csv"), "check,pass", &rows)?;
    if !all_ok {
        eprintln!("resample-check: at least one property failed");
    }
    Ok((vec!["resample-check.csv".to_string()], i32::from(!all_ok)))
}
