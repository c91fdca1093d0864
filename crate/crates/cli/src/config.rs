use std::path::{Path, PathBuf};

use nevlab::dynamics::{ClassifyOptions, MixedSearch};
use nevlab::nevanlinna::{AnnularSector, DescriptorSpec, FitWindow};
use nevlab::probe::ProbeConfig;
use nevlab::render::RenderWindow;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcommandName {
    VerifyAsymptotics,
    Classify,
    Render,
    Probe,
}

/// Everything a run depends on. Reports embed this verbatim, after the
/// command-line overrides are applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: SubcommandName,
    /// Explicit instance. Exactly one of `instance` and `mixed_search`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<DescriptorSpec>,
    /// Instance produced by the mixed-instance finder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_search: Option<MixedSearch>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySettings>,
    /// Orbit classification settings, also used to build Ω for the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    /// Run the Ω-accumulation probe alongside the other probes.
    #[serde(default = "yes")]
    pub accumulation: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    pub region: AnnularSector,
    #[serde(default)]
    pub fit_window: FitWindow,
    #[serde(default)]
    pub preimage_target: Complex64,
    /// Smallest `|j|` used by the angle and residue-constant checks.
    #[serde(default = "default_tail_from")]
    pub tail_from: usize,
    #[serde(default)]
    pub tolerances: VerifyTolerances,
}

fn default_tail_from() -> usize {
    10
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyTolerances {
    pub pole_exponent: f64,
    pub residue_exponent: f64,
    pub derivative_exponent: f64,
    pub pole_spacing: f64,
    pub pole_angle: f64,
    pub residue_constant: f64,
    pub preimage_identity: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            pole_exponent: 0.05,
            residue_exponent: 0.1,
            derivative_exponent: 0.1,
            pole_spacing: 1e-9,
            pole_angle: 0.1,
            residue_constant: 0.03,
            preimage_identity: 1e-8,
        }
    }
}

impl VerifyTolerances {
    fn all(&self) -> [f64; 7] {
        [
            self.pole_exponent,
            self.residue_exponent,
            self.derivative_exponent,
            self.pole_spacing,
            self.pole_angle,
            self.residue_constant,
            self.preimage_identity,
        ]
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{name} = {v} must be positive")))
    }
}

fn check_classify(c: &ClassifyOptions) -> Result<(), Failure> {
    positive("classify.delta", c.delta)?;
    positive("classify.cycle_tol", c.cycle_tol)?;
    positive("classify.pole_tol", c.pole_tol)?;
    positive("classify.escape_radius", c.escape_radius)?;
    if c.n_max == 0 || c.max_period == 0 {
        return Err(Failure::Config("classify.n_max and classify.max_period must be positive".into()));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.instance.is_some() == self.mixed_search.is_some() {
            return Err(Failure::Config("give exactly one of `instance` and `mixed_search`".into()));
        }
        if let Some(s) = &self.mixed_search {
            positive("mixed_search.delta", s.delta)?;
            check_classify(&s.classify)?;
        }
        if let Some(v) = &self.verify {
            v.region.validate().map_err(|e| Failure::Config(e.to_string()))?;
            v.tolerances.all().iter().try_for_each(|&t| positive("verify tolerance", t))?;
        }
        if let Some(c) = &self.classify {
            check_classify(c)?;
        }
        if let Some(r) = &self.render {
            r.validate().map_err(|e| Failure::Config(e.to_string()))?;
        }
        if let Some(p) = &self.probe {
            p.validate().map_err(|e| Failure::Config(e.to_string()))?;
        }
        let missing = match self.subcommand {
            SubcommandName::VerifyAsymptotics => self.verify.is_none().then_some("verify"),
            SubcommandName::Render => self.render.is_none().then_some("render"),
            SubcommandName::Probe => self.probe.is_none().then_some("probe"),
            SubcommandName::Classify => None,
        };
        match missing {
            Some(section) => Err(Failure::Config(format!("missing `{section}` section"))),
            None => Ok(()),
        }
    }

    /// `--seed` replaces both the run seed and the probe seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(p) = &mut self.probe {
            p.seed = seed;
        }
    }
}
