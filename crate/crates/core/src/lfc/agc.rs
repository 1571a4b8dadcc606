use super::{validate_participation, Result};

/// Area control error: `ACE = ΔP_tie − 10·B·Δf`.
pub fn compute_ace(tie_flow_dev: f64, freq_bias: f64, freq_dev: f64) -> f64 {
    tie_flow_dev - 10.0 * freq_bias * freq_dev
}

/// PI AGC law: `u = −K_P·ACE − K_I·∫ACE`.
pub fn pi_agc_command(ace: f64, ace_integral: f64, k_p: f64, k_i: f64) -> f64 {
    -k_p * ace - k_i * ace_integral
}

/// Splits a total command over generators by participation factor.
pub fn dispatch_command(u: f64, participation: &[f64]) -> Result<Vec<f64>> {
    validate_participation(participation)?;
    Ok(participation.iter().map(|a| a * u).collect())
}

/// Trapezoidal running integral of a sampled ACE signal.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AceIntegrator {
    value: f64,
    last: Option<f64>,
}

impl AceIntegrator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sample taken `interval` seconds after the previous one and
    /// returns the updated integral. The first sample only seeds the rule.
    pub fn push(&mut self, ace: f64, interval: f64) -> f64 {
        if let Some(prev) = self.last {
            self.value += 0.5 * (prev + ace) * interval;
        }
        self.last = Some(ace);
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}
