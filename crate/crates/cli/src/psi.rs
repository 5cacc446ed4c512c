//! Test functions selectable by name in experiment configs.

use std::str::FromStr;

/// A named test function applied to particle states when reporting
/// estimates. Exposed as `indicator:k`, `identity`, and `square`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    /// 1 if the (discrete) state equals k, else 0.
    Indicator(usize),
    Identity,
    Square,
}

impl Psi {
    /// Evaluation on real-valued states. `indicator:k` tests equality with
    /// k after rounding, which only makes sense for integer-valued chains.
    pub fn eval_continuous(&self, x: f64) -> f64 {
        match self {
            Psi::Indicator(k) => {
                if x.round() == *k as f64 {
                    1.0
                } else {
                    0.0
                }
            }
            Psi::Identity => x,
            Psi::Square => x * x,
        }
    }

    /// Evaluation on discrete states.
    pub fn eval_discrete(&self, x: usize) -> f64 {
        match self {
            Psi::Indicator(k) => {
                if x == *k {
                    1.0
                } else {
                    0.0
                }
            }
            Psi::Identity => x as f64,
            Psi::Square => (x * x) as f64,
        }
    }

    /// The function tabulated on a discrete state space of size m.
    pub fn table(&self, m: usize) -> Vec<f64> {
        (0..m).map(|x| self.eval_discrete(x)).collect()
    }
}

impl FromStr for Psi {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Psi::Identity),
            "square" => Ok(Psi::Square),
            _ => {
                if let Some(k) = s.strip_prefix("indicator:") {
                    k.parse::<usize>()
                        .map(Psi::Indicator)
                        .map_err(|_| format!("bad indicator index `{k}`"))
                } else {
                    Err(format!(
                        "unknown test function `{s}` (expected identity, square, or indicator:k)"
                    ))
                }
            }
        }
    }
}
