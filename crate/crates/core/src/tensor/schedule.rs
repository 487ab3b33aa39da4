use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup from zero to `peak_lr`, then cosine decay to `final_lr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub warmup_epochs: usize,
    pub peak_lr: f64,
    pub final_lr: f64,
    pub total_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            warmup_epochs: 10,
            peak_lr: 1e-5,
            final_lr: 1e-6,
            total_epochs: 30,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs >= self.total_epochs {
            return Err(Error::Argument(format!(
                "warmup_epochs ({}) must be below total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if !(self.peak_lr >= 0.0 && self.final_lr >= 0.0) {
            return Err(Error::Argument("learning rates must be non-negative".into()));
        }
        Ok(())
    }

    /// Learning rate at a (possibly fractional) epoch in `[0, total_epochs]`.
    pub fn lr_at(&self, epoch: f64) -> Result<f64> {
        self.validate()?;
        let total = self.total_epochs as f64;
        if !(0.0..=total).contains(&epoch) {
            return Err(Error::Argument(format!("epoch {epoch} outside [0, {total}]")));
        }
        let warmup = self.warmup_epochs as f64;
        if epoch <= warmup && self.warmup_epochs > 0 {
            return Ok(self.peak_lr * epoch / warmup);
        }
        let progress = (epoch - warmup) / (total - warmup);
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        Ok(self.final_lr + (self.peak_lr - self.final_lr) * cosine)
    }
}
