//! Small numeric helpers.

/// log(sum(exp(x_i))) with the running maximum subtracted first.
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Kahan compensated sum.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub const LOG_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_74; // -0.5 ln(2 pi)

/// Log density of N(mean, var) at x.
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    LOG_INV_SQRT_2PI - 0.5 * var.ln() - d * d / (2.0 * var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1f64, -2.0, 1.3];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let shifted = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((shifted - (-1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn normal_logpdf_standard() {
        assert!((normal_logpdf(0.0, 0.0, 1.0) - LOG_INV_SQRT_2PI).abs() < 1e-15);
    }
}
