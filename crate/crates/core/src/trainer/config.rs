use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::otcore::CostKind;
use crate::protohead::HeadKind;
use crate::Real;

/// Hyperparameters of one training run. Field names are the ones accepted in
/// configuration files; omitted fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_epochs: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub lr_pc: Real,
    pub n_layers: usize,
    pub n_hidden: usize,
    pub n_ffn_hidden: usize,
    pub dropout_gnn: Real,
    pub dropout_fnn: Real,
    pub n_pc: usize,
    pub pc_size: usize,
    pub pc_hidden: usize,
    pub nc_coef: Real,
    pub head: HeadKind,
    /// Must agree with `head` when given.
    pub cost: Option<CostKind>,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_epochs: 150,
            batch_size: 16,
            lr: 5e-4,
            lr_pc: 5e-3,
            n_layers: 5,
            n_hidden: 200,
            n_ffn_hidden: 100,
            dropout_gnn: 0.0,
            dropout_fnn: 0.0,
            n_pc: 10,
            pc_size: 10,
            pc_hidden: 10,
            nc_coef: 0.1,
            head: HeadKind::ProtoWL2,
            cost: None,
            patience: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Parses a JSON document; unknown or mistyped fields are usage errors.
    pub fn from_json(text: &str) -> Result<TrainConfig> {
        let mut de = serde_json::Deserializer::from_str(text);
        let config: TrainConfig =
            serde_path_to_error::deserialize(&mut de).map_err(|e| match e.path().to_string().as_str() {
                "." => Error::Usage(format!("invalid config: {}", e.inner())),
                path => Error::Usage(format!("invalid config field `{path}`: {}", e.inner())),
            })?;
        de.end().map_err(|e| Error::Usage(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_epochs", self.n_epochs),
            ("batch_size", self.batch_size),
            ("n_layers", self.n_layers),
            ("n_hidden", self.n_hidden),
            ("n_ffn_hidden", self.n_ffn_hidden),
            ("n_pc", self.n_pc),
            ("pc_size", self.pc_size),
            ("pc_hidden", self.pc_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Usage(format!("config field {name} must be ≥ 1")));
            }
        }
        for (name, v) in [("lr", self.lr), ("lr_pc", self.lr_pc), ("nc_coef", self.nc_coef)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("config field {name} must be finite and ≥ 0, got {v}")));
            }
        }
        for (name, v) in [("dropout_gnn", self.dropout_gnn), ("dropout_fnn", self.dropout_fnn)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Usage(format!("config field {name} must lie in [0, 1), got {v}")));
            }
        }
        if let Some(cost) = self.cost {
            if self.head.cost() != Some(cost) {
                return Err(Error::Usage(format!(
                    "config field cost: {cost:?} does not match head {}",
                    self.head
                )));
            }
        }
        Ok(())
    }

    /// Whether the contrastive term is part of the objective.
    pub fn uses_contrastive(&self) -> bool {
        self.head.uses_transport() && self.nc_coef > 0.0
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
