use serde::Serialize;

use crate::cost::Metric;
use crate::error::{Error, Result};
use crate::relation::Divergence;

/// Validated solver parameters. Build with [`SolverConfig::builder`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    epsilon: f64,
    relative_epsilon: bool,
    rho: f64,
    alpha: f64,
    max_iterations: usize,
    tolerance: f64,
    divergence: Divergence,
    intra_metric: Metric,
    seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfigBuilder::default()
            .build()
            .expect("default configuration is valid")
    }
}

impl SolverConfig {
    pub fn builder() -> SolverConfigBuilder {
        SolverConfigBuilder::default()
    }

    /// Builder pre-filled with this configuration's values.
    pub fn to_builder(&self) -> SolverConfigBuilder {
        SolverConfigBuilder {
            epsilon: self.epsilon,
            relative_epsilon: self.relative_epsilon,
            rho: self.rho,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            divergence: self.divergence,
            intra_metric: self.intra_metric,
            seed: self.seed,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// When set, `epsilon` is multiplied by the largest objective entry.
    pub fn relative_epsilon(&self) -> bool {
        self.relative_epsilon
    }

    /// Regularization weight actually applied for an objective whose largest
    /// entry is `max_objective`.
    pub fn effective_epsilon(&self, max_objective: f64) -> f64 {
        if self.relative_epsilon && max_objective > 0.0 {
            self.epsilon * max_objective
        } else {
            self.epsilon
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn divergence(&self) -> Divergence {
        self.divergence
    }

    pub fn intra_metric(&self) -> Metric {
        self.intra_metric
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfigBuilder {
    pub epsilon: f64,
    pub relative_epsilon: bool,
    pub rho: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub divergence: Divergence,
    pub intra_metric: Metric,
    pub seed: u64,
}

impl Default for SolverConfigBuilder {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            relative_epsilon: false,
            rho: 0.1,
            alpha: 0.5,
            max_iterations: 10_000,
            tolerance: 1e-9,
            divergence: Divergence::Js,
            intra_metric: Metric::SqEuclidean,
            seed: 0,
        }
    }
}

impl SolverConfigBuilder {
    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn relative_epsilon(mut self, relative: bool) -> Self {
        self.relative_epsilon = relative;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn divergence(mut self, divergence: Divergence) -> Self {
        self.divergence = divergence;
        self
    }

    pub fn intra_metric(mut self, metric: Metric) -> Self {
        self.intra_metric = metric;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Result<SolverConfig> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("rho", self.rho)?;
        positive("tolerance", self.tolerance)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(SolverConfig {
            epsilon: self.epsilon,
            relative_epsilon: self.relative_epsilon,
            rho: self.rho,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            divergence: self.divergence,
            intra_metric: self.intra_metric,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.epsilon(), 0.005);
        assert_eq!(cfg.rho(), 0.1);
        assert_eq!(cfg.alpha(), 0.5);
        assert_eq!(cfg.tolerance(), 1e-9);
        assert_eq!(cfg.max_iterations(), 10_000);
        assert_eq!(cfg.divergence(), Divergence::Js);
    }

    #[test]
    fn bounds_enforced() {
        assert!(SolverConfig::builder().epsilon(0.0).build().is_err());
        assert!(SolverConfig::builder().rho(-1.0).build().is_err());
        assert!(SolverConfig::builder().alpha(1.0).build().is_err());
        assert!(SolverConfig::builder().alpha(0.0).build().is_err());
        assert!(SolverConfig::builder().tolerance(f64::NAN).build().is_err());
        assert!(SolverConfig::builder().max_iterations(0).build().is_err());
    }

    #[test]
    fn relative_epsilon_scales() {
        let cfg = SolverConfig::builder()
            .epsilon(1e-3)
            .relative_epsilon(true)
            .build()
            .unwrap();
        assert_eq!(cfg.effective_epsilon(2.0), 2e-3);
        assert_eq!(SolverConfig::default().effective_epsilon(2.0), 0.005);
    }
}
