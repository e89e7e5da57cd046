//! Run settings from flags, a flat JSON config file and defaults, in that
//! order of precedence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voromesh_core::metrics::{DEFAULT_F1_THRESHOLD, DEFAULT_METRIC_SAMPLES};
use voromesh_core::optim::FitConfig;
use voromesh_core::voronoi::ClipBox;

use crate::pipeline::PipelineConfig;

pub const THREADS_ENV: &str = "VOROMESH_THREADS";

/// Optional settings. Doubles as the command-line flag group and as the
/// schema of the config file, whose keys are the flag names.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Grid resolution g_s
    #[arg(long)]
    pub grid: Option<usize>,
    /// Surface samples (default 150 * grid^2)
    #[arg(long)]
    pub samples: Option<usize>,
    /// Adam steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch fraction in (0, 1]
    #[arg(long)]
    pub minibatch: Option<f64>,
    /// Candidate neighbors per sample
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight of the maximum-offset regularizer
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores, 1 is deterministic
    #[arg(long)]
    pub threads: Option<usize>,
    /// Samples per surface for metrics
    #[arg(long)]
    pub metric_samples: Option<usize>,
    #[arg(long)]
    pub metric_seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: std::path::PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: std::path::PathBuf, source: serde_json::Error },
    #[error("{THREADS_ENV}: expected a thread count, found `{0}`")]
    Env(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

impl Overrides {
    pub fn from_json(text: &str, path: &Path) -> Result<Overrides, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Overrides, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Overrides::from_json(&text, path)
    }

    /// Fields set here win over `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            grid: self.grid.or(other.grid),
            samples: self.samples.or(other.samples),
            steps: self.steps.or(other.steps),
            lr: self.lr.or(other.lr),
            minibatch: self.minibatch.or(other.minibatch),
            k: self.k.or(other.k),
            lambda: self.lambda.or(other.lambda),
            seed: self.seed.or(other.seed),
            threads: self.threads.or(other.threads),
            metric_samples: self.metric_samples.or(other.metric_samples),
            metric_seed: self.metric_seed.or(other.metric_seed),
        }
    }
}

/// Fully resolved settings, recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub grid: usize,
    pub samples: Option<usize>,
    pub steps: usize,
    pub lr: f64,
    pub halving_steps: Vec<usize>,
    pub minibatch: f64,
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub threads: usize,
    pub metric_samples: usize,
    pub metric_seed: u64,
    pub f1_threshold: f64,
}

impl Settings {
    /// `flags` over `file` over the threads variable (if `env_threads` is
    /// given) over defaults.
    pub fn resolve(flags: Overrides, file: Option<Overrides>, env_threads: Option<&str>) -> Result<Settings, ConfigError> {
        let o = flags.or(file.unwrap_or_default());
        let threads = match (o.threads, env_threads) {
            (Some(t), _) => t,
            (None, Some(v)) => v.trim().parse().map_err(|_| ConfigError::Env(v.to_string()))?,
            (None, None) => 0,
        };
        let fit = FitConfig::default();
        let s = Settings {
            grid: o.grid.unwrap_or(fit.grid_resolution),
            samples: o.samples,
            steps: o.steps.unwrap_or(fit.steps),
            lr: o.lr.unwrap_or(fit.learning_rate),
            halving_steps: fit.halving_steps,
            minibatch: o.minibatch.unwrap_or(fit.minibatch_fraction),
            k: o.k.unwrap_or(fit.k),
            lambda: o.lambda.unwrap_or(fit.lambda),
            seed: o.seed.unwrap_or(fit.seed),
            threads,
            metric_samples: o.metric_samples.unwrap_or(DEFAULT_METRIC_SAMPLES),
            metric_seed: o.metric_seed.unwrap_or(0),
            f1_threshold: DEFAULT_F1_THRESHOLD,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.grid < 2 {
            return bad("grid must be at least 2");
        }
        if self.samples == Some(0) {
            return bad("samples must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive and finite");
        }
        if !(self.minibatch > 0.0 && self.minibatch <= 1.0) {
            return bad("minibatch must lie in (0, 1]");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be nonnegative and finite");
        }
        if self.metric_samples == 0 {
            return bad("metric_samples must be positive");
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            grid_resolution: self.grid,
            steps: self.steps,
            learning_rate: self.lr,
            halving_steps: self.halving_steps.clone(),
            minibatch_fraction: self.minibatch,
            k: self.k,
            lambda: self.lambda,
            seed: self.seed,
            ..FitConfig::default()
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            fit: self.fit_config(),
            samples: self.samples,
            metric_samples: self.metric_samples,
            metric_seed: self.metric_seed,
            f1_threshold: self.f1_threshold,
            clip_box: ClipBox::around_unit_box(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("config.json")
    }

    #[test]
    fn defaults_follow_the_fit_schedule() {
        let s = Settings::resolve(Overrides::default(), None, None).unwrap();
        assert_eq!((s.grid, s.steps, s.k, s.threads), (32, 400, 32, 0));
        assert_eq!(s.lr, 0.005);
        assert_eq!(s.halving_steps, vec![80, 120, 200, 250]);
        assert_eq!(s.pipeline_config().sample_count(), 150 * 32 * 32);
    }

    #[test]
    fn flags_win_over_file_over_env() {
        let file = Overrides::from_json(r#"{"grid": 16, "steps": 7, "threads": 3}"#, p()).unwrap();
        let flags = Overrides { steps: Some(9), ..Overrides::default() };
        let s = Settings::resolve(flags, Some(file.clone()), Some("5")).unwrap();
        assert_eq!((s.grid, s.steps, s.threads), (16, 9, 3));
        let s = Settings::resolve(Overrides::default(), None, Some(" 5 ")).unwrap();
        assert_eq!(s.threads, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Overrides::from_json(r#"{"grdi": 16}"#, p()), Err(ConfigError::Parse { .. })));
        assert!(matches!(Overrides::from_json(r#"{"grid": "16"}"#, p()), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for o in [
            Overrides { grid: Some(1), ..Default::default() },
            Overrides { minibatch: Some(1.5), ..Default::default() },
            Overrides { lr: Some(0.0), ..Default::default() },
            Overrides { lambda: Some(-1.0), ..Default::default() },
        ] {
            assert!(matches!(Settings::resolve(o, None, None), Err(ConfigError::Invalid(_))));
        }
        assert!(matches!(Settings::resolve(Overrides::default(), None, Some("many")), Err(ConfigError::Env(_))));
    }
}
