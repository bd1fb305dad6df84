use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for σ² + Σ a²ν = 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A compensated Poisson component: jumps of `size` arriving at rate `intensity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    #[serde(rename = "a")]
    pub size: f64,
    #[serde(rename = "nu")]
    pub intensity: f64,
}

/// Law of one standard Lévy martingale: σ W_t plus compensated Poisson
/// components, normalized so that ⟨M, M⟩_t = t.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLevySpec {
    sigma: f64,
    jumps: Vec<Jump>,
}

/// Named driver families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Brownian,
    /// Pure compensated Poisson with jump size `a` and rate 1/a².
    Poisson { a: f64 },
    /// σ W plus compensated Poisson with size `a` and rate (1 − σ²)/a².
    Mixed { sigma: f64, a: f64 },
}

/// Either a preset or explicit parameters for one driver.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverRecipe {
    Preset(Preset),
    Explicit { sigma: f64, jumps: Vec<Jump> },
}

impl StandardLevySpec {
    pub fn new(sigma: f64, jumps: Vec<Jump>) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::NonNormalizable(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        for j in &jumps {
            if j.size == 0.0 {
                return Err(Error::ZeroJumpSize);
            }
            if !(j.intensity > 0.0) || !j.intensity.is_finite() || !j.size.is_finite() {
                return Err(Error::NonNormalizable(format!(
                    "jump intensity must be finite and > 0, got {}",
                    j.intensity
                )));
            }
        }
        let spec = StandardLevySpec { sigma, jumps };
        let rate = spec.bracket_rate();
        if (rate - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NonNormalizable(format!("σ² + Σ a²ν = {rate}, expected 1")));
        }
        Ok(spec)
    }

    pub fn brownian() -> Self {
        StandardLevySpec { sigma: 1.0, jumps: Vec::new() }
    }

    pub fn from_preset(preset: Preset) -> Result<Self> {
        match preset {
            Preset::Brownian => Ok(Self::brownian()),
            Preset::Poisson { a } => {
                if a == 0.0 {
                    return Err(Error::ZeroJumpSize);
                }
                StandardLevySpec::new(0.0, vec![Jump { size: a, intensity: 1.0 / (a * a) }])
            }
            Preset::Mixed { sigma, a } => {
                if a == 0.0 {
                    return Err(Error::ZeroJumpSize);
                }
                if !(0.0..1.0).contains(&sigma) {
                    return Err(Error::NonNormalizable(format!(
                        "mixed driver needs 0 <= sigma < 1 to leave room for jumps, got {sigma}"
                    )));
                }
                let nu = (1.0 - sigma * sigma) / (a * a);
                StandardLevySpec::new(sigma, vec![Jump { size: a, intensity: nu }])
            }
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// σ² + Σ a²ν, the rate of the predictable bracket.
    pub fn bracket_rate(&self) -> f64 {
        self.sigma * self.sigma + self.jumps.iter().map(|j| j.size * j.size * j.intensity).sum::<f64>()
    }

    /// Σ a ν, the drift removed per unit time by compensation.
    pub fn compensator_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.size * j.intensity).sum()
    }
}

/// One spec per index; a single recipe is broadcast to all `modes` indices.
pub fn make_standard_specs(modes: usize, recipe: &[DriverRecipe]) -> Result<Vec<StandardLevySpec>> {
    if modes == 0 {
        return Err(Error::config("space.J", "must be >= 1"));
    }
    let build = |r: &DriverRecipe| match r {
        DriverRecipe::Preset(p) => StandardLevySpec::from_preset(*p),
        DriverRecipe::Explicit { sigma, jumps } => StandardLevySpec::new(*sigma, jumps.clone()),
    };
    match recipe.len() {
        1 => {
            let spec = build(&recipe[0])?;
            Ok(vec![spec; modes])
        }
        n if n == modes => recipe.iter().map(build).collect(),
        n => Err(Error::dims("driver recipes", modes, n)),
    }
}
