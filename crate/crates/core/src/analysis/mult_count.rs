use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultCountMode {
    Vime,
    Imle,
}

impl FromStr for MultCountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vime" => Ok(Self::Vime),
            "imle" => Ok(Self::Imle),
            other => Err(Error::Usage(format!("unknown mode `{other}` (expected vime or imle)"))),
        }
    }
}

impl fmt::Display for MultCountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vime => "vime",
            Self::Imle => "imle",
        })
    }
}

fn chain_cost(sizes: &[usize]) -> u64 {
    sizes.windows(2).map(|w| (w[0] * w[1]) as u64).sum()
}

/// Multiplications needed to score one transition.
///
/// * `vime`: every sampled network runs the whole raw-state MLP,
///   `(n_in·h₁ + … + h_k·state) · samples` with `n_in = state + action`.
/// * `imle`: the encoder `n_in → h₁ → … → h_k` runs once, then only the
///   linear model is sampled: `(latent + action) · latent · samples`.
///
/// `latent` defaults to the last hidden width.
pub fn mult_count(state: usize, action: usize, hidden: &[usize], latent: Option<usize>, samples: usize, mode: MultCountMode) -> Result<u64> {
    if state == 0 || action == 0 || hidden.is_empty() || hidden.contains(&0) {
        return Err(Error::Config("dimensions must be positive and at least one hidden layer given".into()));
    }
    let n_in = state + action;
    let mut sizes = vec![n_in];
    sizes.extend_from_slice(hidden);
    Ok(match mode {
        MultCountMode::Vime => {
            sizes.push(state);
            chain_cost(&sizes) * samples as u64
        }
        MultCountMode::Imle => {
            let l = latent.unwrap_or(*hidden.last().expect("non-empty"));
            if l == 0 {
                return Err(Error::Config("latent dimension must be positive".into()));
            }
            chain_cost(&sizes) + ((l + action) * l) as u64 * samples as u64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walker_shape_counts() {
        assert_eq!(mult_count(22, 6, &[32, 32], None, 10, MultCountMode::Vime).unwrap(), 26240);
        assert_eq!(mult_count(22, 6, &[32, 32], None, 10, MultCountMode::Imle).unwrap(), 14080);
    }

    #[test]
    fn zero_samples_leaves_encoder_cost() {
        assert_eq!(mult_count(22, 6, &[32, 32], None, 0, MultCountMode::Imle).unwrap(), 28 * 32 + 32 * 32);
        assert_eq!(mult_count(22, 6, &[32, 32], None, 0, MultCountMode::Vime).unwrap(), 0);
    }

    #[test]
    fn rejects_empty_dims() {
        assert!(mult_count(0, 1, &[32], None, 1, MultCountMode::Vime).is_err());
        assert!(mult_count(2, 1, &[], None, 1, MultCountMode::Imle).is_err());
    }
}
