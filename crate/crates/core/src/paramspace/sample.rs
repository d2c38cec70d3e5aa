use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::Configuration;
use super::space::{Parameter, ParameterSpace};
use super::value::{Domain, Value};

/// Rejection attempts before a space is declared over-constrained.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no valid configuration found in {0} attempts; the space is over-constrained")]
pub struct OverConstrained(pub usize);

/// Draw one value uniformly from a domain (log-uniform for log-scaled reals).
pub fn sample_value<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Value {
    match domain {
        Domain::Integer { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
        Domain::Real { lo, hi, log } => {
            if lo == hi {
                return Value::Real(*lo);
            }
            let v = if *log {
                10f64.powf(rng.random_range(lo.log10()..hi.log10()))
            } else {
                rng.random_range(*lo..*hi)
            };
            Value::Real(v.clamp(*lo, *hi))
        }
        Domain::Categorical(vals) => Value::Cat(vals[rng.random_range(0..vals.len())].clone()),
    }
}

fn sample_param<R: Rng + ?Sized>(p: &Parameter, rng: &mut R) -> Value {
    sample_value(&p.domain, rng)
}

impl ParameterSpace {
    /// Draw a configuration from `rng`, walking parameters in dependency
    /// order and rejecting forbidden combinations.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Configuration, OverConstrained> {
        for _ in 0..MAX_REJECTIONS {
            let values = self.repair(&BTreeMap::new(), |p| sample_param(p, rng));
            if self.violated_clause(&values).is_none() {
                return Ok(self
                    .validate_config(&values)
                    .expect("sampled configuration is valid by construction"));
            }
        }
        Err(OverConstrained(MAX_REJECTIONS))
    }

    /// One random configuration; the same seed always gives the same result.
    pub fn sample_random(&self, seed: u64) -> Result<Configuration, OverConstrained> {
        self.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}
