use std::path::{Path, PathBuf};

use layoutsplat::geometry::SurfaceSamplingConfig;
use layoutsplat::guidance::{CheckerTexture, FlatColor, GuidanceProvider};
use layoutsplat::io::{load_checkpoint, load_targets};
use layoutsplat::optim::{reference_targets, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment: everything `generate` and `serve` need besides flags.
/// Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub sampling: SurfaceSamplingConfig,
    pub optimizer: OptimizerConfig,
    pub guidance: ProviderConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            layout: None,
            out: PathBuf::from("out"),
            seed: 0,
            sampling: SurfaceSamplingConfig::default(),
            optimizer: OptimizerConfig::default(),
            guidance: ProviderConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    FlatColor { color: [f64; 3] },
    Checker { colors: [[f64; 3]; 2], cell: f64 },
    /// A directory written by `save_targets`.
    Photometric { targets: PathBuf },
    /// Targets rendered from a hidden reference checkpoint with this run's
    /// cameras.
    Reference { checkpoint: PathBuf },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::FlatColor { color: [0.5; 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Evenly spaced azimuths rendered after a run.
    pub turntable_views: usize,
    /// Steps between checkpoints written during `generate`.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { turntable_views: 8, checkpoint_every: 100 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(l) = self.layout.as_mut() {
            fix(l);
        }
        fix(&mut self.out);
        match &mut self.guidance {
            ProviderConfig::Photometric { targets } => fix(targets),
            ProviderConfig::Reference { checkpoint } => fix(checkpoint),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.optimizer.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.sampling.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if self.output.checkpoint_every == 0 {
            return Err(CliError::Validation("output.checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn provider(&self) -> Result<Box<dyn GuidanceProvider>, CliError> {
        Ok(match &self.guidance {
            ProviderConfig::FlatColor { color } => Box::new(FlatColor { color: *color }),
            ProviderConfig::Checker { colors, cell } => Box::new(CheckerTexture { colors: *colors, cell: *cell }),
            ProviderConfig::Photometric { targets } => {
                Box::new(load_targets(targets).map_err(|e| CliError::Io(format!("{}: {e}", targets.display())))?)
            }
            ProviderConfig::Reference { checkpoint } => {
                let reference = load_checkpoint(checkpoint).map_err(|e| CliError::Io(format!("{}: {e}", checkpoint.display())))?;
                Box::new(reference_targets(&reference, &self.optimizer).map_err(|e| CliError::Validation(e.to_string()))?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            layout = "scene.json"
            seed = 3
            [optimizer]
            steps = 200
            [optimizer.lr]
            position = 1e-3
            [guidance]
            provider = "checker"
            colors = [[0, 0, 0], [1, 1, 1]]
            cell = 0.3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.optimizer.steps, 200);
        assert_eq!(cfg.optimizer.lr.position, 1e-3);
        assert_eq!(cfg.optimizer.lr.opacity, 5e-2);
        assert_eq!(cfg.sampling.particle_count, 100_000);
        assert!(matches!(cfg.guidance, ProviderConfig::Checker { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("stepz = 3").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let mut cfg = RunConfig { layout: Some("a.json".into()), ..Default::default() };
        cfg.resolve(Path::new("/exp"));
        assert_eq!(cfg.layout.unwrap(), PathBuf::from("/exp/a.json"));
        assert_eq!(cfg.out, PathBuf::from("/exp/out"));
    }
}
