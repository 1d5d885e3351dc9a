//! Run configuration: a single JSON document with the flux family, initial
//! profiles, approximation parameters and output controls. Unknown keys are
//! rejected.

use crate::flux::{BumpedCorey, Corey, FluxModel};
use crate::tracker::Profile;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn default_window() -> f64 {
    5.0
}

fn default_curvature() -> f64 {
    0.25
}

fn default_entropies() -> Vec<String> {
    vec!["square".into(), "quartic".into(), "expm1".into()]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "kebab-case")]
pub enum FluxSpec {
    Corey {
        #[serde(default = "default_curvature")]
        curvature: f64,
    },
    BumpedCorey {
        #[serde(default = "default_curvature")]
        curvature: f64,
        bump: f64,
    },
}

impl Default for FluxSpec {
    fn default() -> Self {
        FluxSpec::Corey {
            curvature: default_curvature(),
        }
    }
}

impl FluxSpec {
    pub fn build(&self) -> Result<FluxModel> {
        match *self {
            FluxSpec::Corey { curvature } => FluxModel::new(Arc::new(Corey::new(curvature)?)),
            FluxSpec::BumpedCorey { curvature, bump } => {
                FluxModel::new(Arc::new(BumpedCorey::new(curvature, bump)?))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Ramp from `from` at `x0` to `to` at `x1`, constant outside.
    Linear {
        x0: f64,
        x1: f64,
        from: f64,
        to: f64,
    },
    Sine {
        mean: f64,
        amplitude: f64,
        wavelength: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Constant { value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::Config(format!("constant {value} outside [0,1]")));
                }
                Ok(Profile::constant(*value))
            }
            ProfileSpec::Piecewise {
                breakpoints,
                values,
            } => Ok(Profile::Piecewise {
                breakpoints: breakpoints.clone(),
                values: values.clone(),
            }),
            ProfileSpec::Linear { x0, x1, from, to } => {
                if x1 <= x0 {
                    return Err(Error::Config(format!("linear profile needs x0 < x1")));
                }
                for v in [*from, *to] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Config(format!("ramp value {v} outside [0,1]")));
                    }
                }
                let (x0, x1, from, to) = (*x0, *x1, *from, *to);
                Ok(Profile::Analytic(Arc::new(move |x: f64| {
                    let u = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                    from + (to - from) * u
                })))
            }
            ProfileSpec::Sine {
                mean,
                amplitude,
                wavelength,
                phase,
            } => {
                if *wavelength <= 0.0 {
                    return Err(Error::Config("sine wavelength must be positive".into()));
                }
                if mean - amplitude.abs() < 0.0 || mean + amplitude.abs() > 1.0 {
                    return Err(Error::Config(
                        "sine profile leaves [0,1]; shrink amplitude".into(),
                    ));
                }
                let (m, a, w, p) = (*mean, *amplitude, *wavelength, *phase);
                Ok(Profile::Analytic(Arc::new(move |x: f64| {
                    (m + a * (2.0 * std::f64::consts::PI * x / w + p).sin()).clamp(0.0, 1.0)
                })))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub s: ProfileSpec,
    pub c: ProfileSpec,
    pub k: ProfileSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub flux: FluxSpec,
    pub initial: InitialSpec,
    /// Approximation parameters, strictly decreasing.
    pub eps_list: Vec<f64>,
    pub time_horizon: f64,
    /// Output and audit window `[-window, window]`.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_entropies")]
    pub entropies: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Event-count safeguard; `POLYFRONT_MAX_EVENTS` overrides it.
    #[serde(default)]
    pub max_events: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list must not be empty".into()));
        }
        for &e in &self.eps_list {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("eps {e} must be positive")));
            }
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "eps_list must be strictly decreasing".into(),
            ));
        }
        if !(self.time_horizon > 0.0) {
            return Err(Error::Config(format!(
                "time_horizon {} must be positive",
                self.time_horizon
            )));
        }
        if !(self.window > 0.0) {
            return Err(Error::Config(format!(
                "window {} must be positive",
                self.window
            )));
        }
        for &t in &self.output_times {
            if t < 0.0 || t > self.time_horizon {
                return Err(Error::Config(format!(
                    "output time {t} outside [0, {}]",
                    self.time_horizon
                )));
            }
        }
        for id in &self.entropies {
            crate::entropy::Entropy::from_id(id)?;
        }
        self.flux.build()?;
        self.initial.s.build()?;
        self.initial.c.build()?;
        self.initial.k.build()?;
        Ok(())
    }

    pub fn model(&self) -> Result<FluxModel> {
        self.flux.build()
    }

    pub fn profiles(&self) -> Result<(Profile, Profile, Profile)> {
        Ok((
            self.initial.s.build()?,
            self.initial.c.build()?,
            self.initial.k.build()?,
        ))
    }

    pub fn entropy_battery(&self) -> Result<Vec<crate::entropy::Entropy>> {
        self.entropies
            .iter()
            .map(|id| crate::entropy::Entropy::from_id(id))
            .collect()
    }
}
