//! Flat `key = value` experiment configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use corrmatch_core::geom::ShapeKind;
use corrmatch_core::learn::{AdamConfig, NetConfig};

use crate::{Error, Result};

/// Where the correspondence matrix comes from in the sweep and partial studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Ground-truth `C*`.
    Oracle,
    /// `softmax(F_Yᵀ F_X)` from a trained feature network.
    Learned,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Oracle => "oracle",
            Mode::Learned => "learned",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(Mode::Oracle),
            "learned" => Ok(Mode::Learned),
            _ => Err(format!("unknown mode {s:?} (expected oracle or learned)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shape: ShapeKind,
    /// Cloud size for the sweep, partial and training studies.
    pub n_points: usize,
    pub trials: usize,
    /// Misalignment half-range for the perturbation study, degrees.
    pub theta0_deg: f64,
    pub t_bound: f64,
    /// Corruption levels in percent.
    pub corruption_grid: Vec<f64>,
    /// Unit-cube cloud size for the perturbation study.
    pub cube_points: usize,
    pub keep_fraction: f64,
    pub outlier_points: usize,
    pub outlier_fraction: f64,
    pub outlier_threshold: f64,
    pub outlier_b: f64,
    /// Resample corrupted points until they are farther than the threshold
    /// from every target.
    pub outlier_rejection: bool,
    /// Misalignment half-range for the outlier study, degrees.
    pub outlier_theta0_deg: f64,
    pub mode: Mode,
    pub checkpoint: Option<PathBuf>,
    pub train_clouds: usize,
    pub test_clouds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub knn_k: usize,
    pub hidden: [usize; 2],
    pub embedding_dim: usize,
    /// Misalignment half-range for training and held-out pairs, degrees.
    pub train_theta0_deg: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let net = NetConfig::default();
        let adam = AdamConfig::default();
        Self {
            seed: 42,
            shape: ShapeKind::AsymmetricBlob,
            n_points: 64,
            trials: 100,
            theta0_deg: 90.0,
            t_bound: 0.5,
            corruption_grid: (0..=9).map(|i| 10.0 * i as f64).collect(),
            cube_points: 512,
            keep_fraction: 0.7,
            outlier_points: 512,
            outlier_fraction: 0.1,
            outlier_threshold: 0.1,
            outlier_b: corrmatch_core::correspondence::DEFAULT_OUTLIER_B,
            outlier_rejection: true,
            outlier_theta0_deg: 45.0,
            mode: Mode::Oracle,
            checkpoint: None,
            train_clouds: 200,
            test_clouds: 50,
            epochs: adam.epochs,
            batch_size: adam.batch_size,
            learning_rate: adam.learning_rate,
            knn_k: net.knn_k,
            hidden: net.hidden,
            embedding_dim: net.embedding_dim,
            train_theta0_deg: 180.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Canonical `(key, value)` pairs, in file order. Parsing this output
    /// reproduces the config.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("shape", self.shape.to_string()),
            ("n_points", self.n_points.to_string()),
            ("trials", self.trials.to_string()),
            ("theta0_deg", self.theta0_deg.to_string()),
            ("t_bound", self.t_bound.to_string()),
            ("corruption_grid", join(&self.corruption_grid)),
            ("cube_points", self.cube_points.to_string()),
            ("keep_fraction", self.keep_fraction.to_string()),
            ("outlier_points", self.outlier_points.to_string()),
            ("outlier_fraction", self.outlier_fraction.to_string()),
            ("outlier_threshold", self.outlier_threshold.to_string()),
            ("outlier_b", self.outlier_b.to_string()),
            ("outlier_rejection", self.outlier_rejection.to_string()),
            ("outlier_theta0_deg", self.outlier_theta0_deg.to_string()),
            ("mode", self.mode.to_string()),
            (
                "checkpoint",
                self.checkpoint
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("train_clouds", self.train_clouds.to_string()),
            ("test_clouds", self.test_clouds.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("knn_k", self.knn_k.to_string()),
            ("hidden", join(&self.hidden)),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("train_theta0_deg", self.train_theta0_deg.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "shape" => self.shape = parse_value(key, value)?,
            "n_points" => self.n_points = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "theta0_deg" => self.theta0_deg = parse_value(key, value)?,
            "t_bound" => self.t_bound = parse_value(key, value)?,
            "corruption_grid" => self.corruption_grid = parse_list(key, value)?,
            "cube_points" => self.cube_points = parse_value(key, value)?,
            "keep_fraction" => self.keep_fraction = parse_value(key, value)?,
            "outlier_points" => self.outlier_points = parse_value(key, value)?,
            "outlier_fraction" => self.outlier_fraction = parse_value(key, value)?,
            "outlier_threshold" => self.outlier_threshold = parse_value(key, value)?,
            "outlier_b" => self.outlier_b = parse_value(key, value)?,
            "outlier_rejection" => self.outlier_rejection = parse_value(key, value)?,
            "outlier_theta0_deg" => self.outlier_theta0_deg = parse_value(key, value)?,
            "mode" => self.mode = parse_value(key, value)?,
            "checkpoint" => self.checkpoint = (!value.is_empty()).then(|| PathBuf::from(value)),
            "train_clouds" => self.train_clouds = parse_value(key, value)?,
            "test_clouds" => self.test_clouds = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "knn_k" => self.knn_k = parse_value(key, value)?,
            "hidden" => {
                let v: Vec<usize> = parse_list(key, value)?;
                self.hidden = v
                    .try_into()
                    .map_err(|_| Error::Config("hidden: expected two layer widths".into()))?;
            }
            "embedding_dim" => self.embedding_dim = parse_value(key, value)?,
            "train_theta0_deg" => self.train_theta0_deg = parse_value(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses config text over the defaults. Later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!(
                    "line {}: {}",
                    i + 1,
                    e.to_string().trim_start_matches("config: ")
                ))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self
            .corruption_grid
            .iter()
            .any(|p| !(0.0..=100.0).contains(p))
        {
            return fail("corruption_grid entries must lie in [0, 100]".into());
        }
        for (name, deg) in [
            ("theta0_deg", self.theta0_deg),
            ("train_theta0_deg", self.train_theta0_deg),
            ("outlier_theta0_deg", self.outlier_theta0_deg),
        ] {
            if !(0.0..=180.0).contains(&deg) {
                return fail(format!("{name} must lie in [0, 180]"));
            }
        }
        if !(self.t_bound >= 0.0 && self.t_bound.is_finite()) {
            return fail("t_bound must be finite and >= 0".into());
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return fail("keep_fraction must lie in (0, 1]".into());
        }
        if !(0.0..=0.5).contains(&self.outlier_fraction) {
            return fail("outlier_fraction must lie in [0, 0.5]".into());
        }
        if !(self.outlier_threshold > 0.0) {
            return fail("outlier_threshold must be > 0".into());
        }
        if !self.outlier_b.is_finite() {
            return fail("outlier_b must be finite".into());
        }
        if self.n_points <= self.knn_k || self.knn_k == 0 {
            return fail(format!(
                "need 1 <= knn_k < n_points, got knn_k = {}, n_points = {}",
                self.knn_k, self.n_points
            ));
        }
        if self.n_points < 8 || self.outlier_points < 8 || self.cube_points < 3 {
            return fail("clouds need at least 8 points (3 for the cube)".into());
        }
        if self.batch_size == 0 || self.embedding_dim == 0 || self.hidden.contains(&0) {
            return fail("batch_size, embedding_dim and hidden widths must be >= 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and >= 0".into());
        }
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            knn_k: self.knn_k,
            hidden: self.hidden,
            embedding_dim: self.embedding_dim,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            ..AdamConfig::default()
        }
    }

    pub fn theta0(&self) -> f64 {
        self.theta0_deg.to_radians()
    }

    pub fn train_theta0(&self) -> f64 {
        self.train_theta0_deg.to_radians()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(
            ExperimentConfig::parse("# nothing\n\n").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn canonical_echo_round_trips() {
        let cfg = ExperimentConfig {
            seed: 7,
            shape: ShapeKind::LBracket,
            corruption_grid: vec![0.0, 12.5, 100.0],
            checkpoint: Some("net.ckpt".into()),
            mode: Mode::Learned,
            theta0_deg: 0.1,
            ..ExperimentConfig::default()
        };
        let text: String = cfg
            .entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn comments_and_spacing() {
        let cfg =
            ExperimentConfig::parse("trials=3   # few\n  shape = helix\ncorruption_grid = 0, 50\n")
                .unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.shape, ShapeKind::Helix);
        assert_eq!(cfg.corruption_grid, vec![0.0, 50.0]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "bogus = 1",
            "trials",
            "trials = -1",
            "corruption_grid = 0, 120",
            "outlier_fraction = 0.7",
            "keep_fraction = 0",
            "mode = magic",
            "hidden = 1,2,3",
            "knn_k = 64",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn error_names_the_line() {
        let err = ExperimentConfig::parse("trials = 2\nwhat = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
