use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ArchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    L1Only,
    L1AdvImg,
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::L1Only, Ablation::L1AdvImg, Ablation::Full];

    pub fn uses_frame_disc(self) -> bool {
        self != Ablation::L1Only
    }

    pub fn uses_seq_disc(self) -> bool {
        self == Ablation::Full
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::L1Only => "l1_only",
            Ablation::L1AdvImg => "l1_adv_img",
            Ablation::Full => "full",
        }
    }

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Ablation::L1Only => "L1 loss",
            Ablation::L1AdvImg => "L1 + Adv_img",
            Ablation::Full => "L1 + Adv_img + Adv_seq",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1_only" => Ok(Self::L1Only),
            "l1_adv_img" => Ok(Self::L1AdvImg),
            "full" => Ok(Self::Full),
            _ => Err(Error::Config(format!("unknown ablation '{s}' (expected l1_only, l1_adv_img or full)"))),
        }
    }
}

/// Generator adversarial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenAdvLoss {
    /// Maximize `log D(G(z))`.
    NonSaturating,
    /// Minimize `log(1 - D(G(z)))`.
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Reduction {
    /// Raw sum over lower-half pixels and channels, averaged over frames.
    Sum,
    /// Mean over lower-half pixels and channels, averaged over frames.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_l1: f64,
    pub lr_generator: f64,
    pub lr_frame_disc: f64,
    pub lr_seq_disc: f64,
    pub decay_start_epoch: usize,
    pub decay_rate: f64,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub adam_betas: (f64, f64),
    pub gen_adv_loss: GenAdvLoss,
    pub l1_reduction: L1Reduction,
    /// Flip each training sample left-right with probability 1/2 per epoch.
    pub mirror: bool,
    /// Remap the colour channels of each training sample (still and frames alike) at random.
    pub colour_jitter: bool,
    /// Also show the sequence discriminator real videos with shuffled frames or another clip's audio as negatives.
    pub seq_disc_negatives: bool,
    pub max_epochs: usize,
    pub max_minutes: Option<f64>,
    pub max_batches_per_epoch: Option<usize>,
    pub val_limit: Option<usize>,
    pub manifest: Option<PathBuf>,
    pub dataset: String,
    pub out_dir: Option<PathBuf>,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 400.0,
            lr_generator: 2e-4,
            lr_frame_disc: 1e-3,
            lr_seq_disc: 5e-5,
            decay_start_epoch: 20,
            decay_rate: 0.1,
            patience: 10,
            batch_size: 16,
            seed: 0,
            ablation: Ablation::Full,
            adam_betas: (0.5, 0.999),
            gen_adv_loss: GenAdvLoss::NonSaturating,
            l1_reduction: L1Reduction::Sum,
            mirror: true,
            colour_jitter: false,
            seq_disc_negatives: false,
            max_epochs: 1000,
            max_minutes: None,
            max_batches_per_epoch: None,
            val_limit: None,
            manifest: None,
            dataset: "custom".into(),
            out_dir: None,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings for the bundled toy dataset.
    pub fn toy() -> Self {
        Self {
            lr_generator: 1e-3,
            batch_size: 8,
            l1_reduction: L1Reduction::Mean,
            colour_jitter: true,
            seq_disc_negatives: true,
            dataset: "toy".into(),
            arch: ArchConfig::toy(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("lr_generator", self.lr_generator),
            ("lr_frame_disc", self.lr_frame_disc),
            ("lr_seq_disc", self.lr_seq_disc),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) {
            return Err(Error::Config(format!("lambda_l1 must be non-negative, got {}", self.lambda_l1)));
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return Err(Error::Config(format!("decay_rate must be in [0, 1), got {}", self.decay_rate)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::Config("adam_betas must lie in [0, 1)".into()));
        }
        self.arch.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Learning rate in (1-based) `epoch` for a decaying network.
    pub fn decayed(&self, base: f64, epoch: usize) -> f64 {
        base * (1.0 - self.decay_rate).powi(epoch.saturating_sub(self.decay_start_epoch) as i32)
    }

    /// (generator, frame discriminator, sequence discriminator) rates for `epoch`.
    pub fn learning_rates(&self, epoch: usize) -> (f64, f64, f64) {
        (self.decayed(self.lr_generator, epoch), self.decayed(self.lr_frame_disc, epoch), self.lr_seq_disc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_schedule() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.lambda_l1, c.lr_generator, c.lr_frame_disc, c.lr_seq_disc), (400.0, 2e-4, 1e-3, 5e-5));
        assert_eq!(c.learning_rates(20), (2e-4, 1e-3, 5e-5));
        let (g, d, s) = c.learning_rates(22);
        assert!((g - 2e-4 * 0.81).abs() < 1e-18 && (d - 1e-3 * 0.81).abs() < 1e-18 && s == 5e-5);
    }

    #[test]
    fn toml_round_trip_and_errors() {
        let c = TrainConfig::toy();
        assert_eq!(TrainConfig::from_toml_str(&c.to_toml()).unwrap(), c);
        let e = TrainConfig::from_toml_str("lr_generatr = 1.0").unwrap_err().to_string();
        assert!(e.contains("lr_generatr"), "{e}");
        let e = TrainConfig::from_toml_str("patience = 0").unwrap_err().to_string();
        assert!(e.contains("patience"), "{e}");
        let c = TrainConfig::from_toml_str("ablation = \"l1_only\"\n[arch]\nheight = 32\nwidth = 32\ndepth = 5\n").unwrap();
        assert_eq!((c.ablation, c.arch.height, c.arch.channel_base), (Ablation::L1Only, 32, 32));
    }
}
