use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::Budget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Signed constant filters plus polynomial filters.
    #[default]
    Piecon,
    /// `U diag(θ) Uᵀ` with one trainable value per eigenvalue.
    FreeEigenvalues,
    /// Polynomial filters only.
    PolyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub(crate) fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Model and training hyperparameters.
///
/// `num_intervals` counts spectral intervals (boundaries = intervals + 1);
/// 0 disables the constant filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_intervals: usize,
    pub window: usize,
    pub poly_degree: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub feat_dropout: f64,
    /// Also apply dropout after each hidden activation.
    pub hidden_dropout: bool,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Apply weight decay to the filter coefficients as well as to W¹, W².
    pub decay_coefficients: bool,
    pub epochs: usize,
    pub activation: Activation,
    pub seed: u64,
    pub use_pos: bool,
    pub use_neg: bool,
    pub use_poly: bool,
    pub variant: Variant,
    pub budget: Budget,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_intervals: 5,
            window: 5,
            poly_degree: 3,
            hidden_dim: 32,
            num_layers: 1,
            feat_dropout: 0.0,
            hidden_dropout: false,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            decay_coefficients: false,
            epochs: 2000,
            activation: Activation::Relu,
            seed: 0,
            use_pos: true,
            use_neg: true,
            use_poly: true,
            variant: Variant::Piecon,
            budget: Budget::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub pos: bool,
    pub neg: bool,
    pub poly: bool,
}

impl Components {
    pub fn constants(self) -> bool {
        self.pos || self.neg
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |field: &'static str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, format!("must lie in [0, 1), got {v}")))
            }
        };
        rate("feat_dropout", self.feat_dropout)?;
        rate("learning_rate", self.learning_rate)?;
        rate("weight_decay", self.weight_decay)?;
        if self.learning_rate == 0.0 {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        for (field, v) in [
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("epochs", self.epochs),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.variant == Variant::Piecon && !(self.use_pos || self.use_neg || self.use_poly) {
            return Err(Error::config("use_poly", "at least one of use_pos, use_neg, use_poly must be set"));
        }
        if self.variant == Variant::Piecon && !self.use_poly && self.num_intervals == 0 {
            return Err(Error::config("num_intervals", "is 0 and use_poly is false, leaving no filters"));
        }
        if self.num_intervals >= 2 && self.window == 0 {
            return Err(Error::config("window", "must be at least 1 when num_intervals >= 2"));
        }
        if let Budget::Entries(0) = self.budget {
            return Err(Error::config("budget", "must keep at least one entry"));
        }
        Ok(())
    }

    /// Filter families that are actually active.
    pub fn components(&self) -> Components {
        match self.variant {
            Variant::Piecon => Components {
                pos: self.use_pos && self.num_intervals > 0,
                neg: self.use_neg && self.num_intervals > 0,
                poly: self.use_poly,
            },
            Variant::PolyOnly => Components {
                pos: false,
                neg: false,
                poly: true,
            },
            Variant::FreeEigenvalues => Components {
                pos: false,
                neg: false,
                poly: false,
            },
        }
    }

    /// Same configuration with the given component toggles.
    pub fn with_components(&self, pos: bool, neg: bool, poly: bool) -> Self {
        ModelConfig {
            use_pos: pos,
            use_neg: neg,
            use_poly: poly,
            variant: Variant::Piecon,
            ..self.clone()
        }
    }
}
