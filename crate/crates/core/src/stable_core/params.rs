use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

pub const DEFAULT_KAPPA: f64 = 1.1;

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

/// The model triple (alpha, beta, gamma) and the moment exponent kappa.
///
/// `alpha` is the scenery index, `beta` the walk index and `gamma` the
/// strategy index. Construct through [`SimParams::new`] to get validation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

impl SimParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_default_kappa(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha, beta, gamma, DEFAULT_KAPPA)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            beta,
            gamma,
            kappa,
        } = *self;
        if ![alpha, beta, gamma, kappa].iter().all(|v| v.is_finite()) {
            return param_err("parameters must be finite");
        }
        if !(alpha > 0.0 && alpha < gamma && gamma <= 2.0) {
            return param_err(format!(
                "need 0 < alpha < gamma <= 2, got alpha={alpha}, gamma={gamma}"
            ));
        }
        if !(beta > 1.0 && beta <= 2.0) {
            return param_err(format!("need 1 < beta <= 2, got beta={beta}"));
        }
        if kappa.is_nan() || kappa <= 1.0 {
            return param_err(format!("need kappa > 1, got kappa={kappa}"));
        }
        if alpha * kappa >= gamma {
            return param_err(format!(
                "need alpha*kappa < gamma for the strategy moment condition to be finite, \
                 got alpha*kappa={} >= gamma={gamma}",
                alpha * kappa
            ));
        }
        Ok(())
    }

    /// 1 - 1/beta, in [0, 1/2].
    pub fn beta_tilde(&self) -> f64 {
        1.0 - 1.0 / self.beta
    }

    pub fn hurst(&self) -> f64 {
        let bt = self.beta_tilde();
        bt / self.gamma + (1.0 - bt) / self.alpha
    }

    /// Exponent of the per-user normalisation r_n = n^{r_exponent}.
    pub fn r_exponent(&self) -> f64 {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        1.0 / g + 1.0 / (a * b) - 1.0 / (g * b)
    }

    pub fn r_n(&self, n: usize) -> f64 {
        (n as f64).powf(self.r_exponent())
    }

    /// beta = 2 sits on the boundary of the local-time representation.
    pub fn on_beta_boundary(&self) -> bool {
        self.beta == 2.0
    }
}
