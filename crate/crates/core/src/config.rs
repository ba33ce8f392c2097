use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{invalid, Result};

pub const DEFAULT_N_ALL: u64 = 1 << 16;
pub const DEFAULT_SLOT_WIDTH_BITS: u32 = 96;

/// Accuracy target and the frame sizes derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub epsilon: f64,
    pub delta: f64,
    /// W, phase-1 trials per type per stop.
    pub trials: u32,
    /// t, slots per phase-1 trial (a power of two).
    pub trial_len: u32,
    /// ℓ, phase-2 blocks.
    pub ell: u32,
    /// S_W, bits carried by one broadcast slot.
    pub slot_width_bits: u32,
}

impl AccuracySpec {
    pub fn new(
        epsilon: f64,
        delta: f64,
        trials: u32,
        n_all: u64,
        ell: u32,
        slot_width_bits: u32,
    ) -> Result<Self> {
        let spec = AccuracySpec {
            epsilon,
            delta,
            trials,
            trial_len: trial_length(n_all)?,
            ell,
            slot_width_bits,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// W taken from [`crate::srcm::select_w`].
    pub fn with_selected_trials(
        epsilon: f64,
        delta: f64,
        n_all: u64,
        ell: u32,
        slot_width_bits: u32,
    ) -> Result<Self> {
        let w = crate::srcm::select_w(delta)?;
        Self::new(epsilon, delta, w, n_all, ell, slot_width_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if self.trials == 0 {
            return Err(invalid("W must be at least 1"));
        }
        if !self.trial_len.is_power_of_two() || self.trial_len < 2 || self.trial_len > 64 {
            return Err(invalid(format!("t must be a power of two in 2..=64, got {}", self.trial_len)));
        }
        if self.ell == 0 {
            return Err(invalid("ell must be at least 1"));
        }
        if self.slot_width_bits == 0 {
            return Err(invalid("slot width must be at least 1 bit"));
        }
        Ok(())
    }
}

/// t = ⌈log2 n_all⌉ rounded up to a power of two (at least 2).
pub fn trial_length(n_all: u64) -> Result<u32> {
    if n_all < 2 {
        return Err(invalid("n_all must be at least 2"));
    }
    let bits = 64 - (n_all - 1).leading_zeros();
    let t = bits.max(2).next_power_of_two();
    if t > 64 {
        return Err(invalid("n_all too large"));
    }
    Ok(t)
}

/// Rate plugged into the empty-slot estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorRate {
    /// The unrounded p of the last stop.
    P,
    /// 2^-I of the last stop, the rate nodes actually transmit with.
    #[default]
    TwoPowI,
}

/// Whether broadcast packets of nested step-2 rounds cost slots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NestedBp {
    #[default]
    Count,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub accuracy: AccuracySpec,
    #[serde(default)]
    pub estimator_rate: EstimatorRate,
    #[serde(default)]
    pub nested_bp: NestedBp,
    #[serde(default)]
    pub energy: EnergyParams,
}

impl ProtocolConfig {
    pub fn new(accuracy: AccuracySpec) -> Self {
        ProtocolConfig {
            accuracy,
            estimator_rate: EstimatorRate::default(),
            nested_bp: NestedBp::default(),
            energy: EnergyParams::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_length_rounds_to_power_of_two() {
        assert_eq!(trial_length(1 << 16).unwrap(), 16);
        assert_eq!(trial_length(1000).unwrap(), 16);
        assert_eq!(trial_length(200).unwrap(), 8);
        assert_eq!(trial_length((1 << 16) + 1).unwrap(), 32);
        assert_eq!(trial_length(2).unwrap(), 2);
        assert!(trial_length(1).is_err());
    }

    #[test]
    fn validation() {
        assert!(AccuracySpec::new(0.03, 0.2, 30, DEFAULT_N_ALL, 100, 96).is_ok());
        assert!(AccuracySpec::new(0.0, 0.2, 30, DEFAULT_N_ALL, 100, 96).is_err());
        assert!(AccuracySpec::new(0.03, 1.0, 30, DEFAULT_N_ALL, 100, 96).is_err());
        assert!(AccuracySpec::new(0.03, 0.2, 0, DEFAULT_N_ALL, 100, 96).is_err());
        assert!(AccuracySpec::new(0.03, 0.2, 30, DEFAULT_N_ALL, 0, 96).is_err());
        assert!(AccuracySpec::new(0.03, 0.2, 30, DEFAULT_N_ALL, 10, 0).is_err());
    }
}
