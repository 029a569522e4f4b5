//! Step-size rules.

use crate::error::{Error, Result};

/// Step-size schedule `t -> γᵗ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `γᵗ = γ`.
    Constant { gamma: f64 },
    /// `γᵗ = γ⁰T⁰ / (t + T⁰)`.
    Diminishing { gamma0: f64, t0: f64 },
    /// `γᵗ = min(ε, ε T̃₀ / t)`, with `γ⁰ = ε`.
    Hybrid { eps: f64, t0: f64 },
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        let s = StepSchedule::Constant { gamma };
        s.validate().map(|_| s)
    }

    pub fn diminishing(gamma0: f64, t0: f64) -> Result<Self> {
        let s = StepSchedule::Diminishing { gamma0, t0 };
        s.validate().map(|_| s)
    }

    pub fn hybrid(eps: f64, t0: f64) -> Result<Self> {
        let s = StepSchedule::Hybrid { eps, t0 };
        s.validate().map(|_| s)
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self {
            StepSchedule::Constant { gamma } => &[("gamma", *gamma)],
            StepSchedule::Diminishing { gamma0, t0 } => &[("gamma0", *gamma0), ("t0", *t0)],
            StepSchedule::Hybrid { eps, t0 } => &[("eps", *eps), ("t0", *t0)],
        };
        for (name, v) in params {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "schedule parameter {name} must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn step(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            StepSchedule::Constant { gamma } => gamma,
            StepSchedule::Diminishing { gamma0, t0 } => gamma0 * t0 / (t + t0),
            StepSchedule::Hybrid { eps, t0 } => {
                if t == 0.0 {
                    eps
                } else {
                    eps.min(eps * t0 / t)
                }
            }
        }
    }
}

/// Free-function form of [`StepSchedule::step`].
pub fn step_size(schedule: &StepSchedule, t: u64) -> f64 {
    schedule.step(t)
}
