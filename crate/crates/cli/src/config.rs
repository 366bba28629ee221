//! Run configuration from flags and a flat `key=value` file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use qudit_learn_core::experiments::ProtocolKind;
use qudit_learn_core::Dimension;
use serde::{Deserialize, Serialize};

use crate::error::UsageError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "QUDIT_LEARN_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Learn,
    Shadows,
    Scaling,
    Twirl,
    Norms,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Prepared state for `learn` and `shadows`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StateKind {
    MaximallyMixed,
    #[default]
    HaarPure,
    /// `(I + ε E_{1,1})/d`.
    Spiked,
}

macro_rules! value_enum_text {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = self.to_possible_value().expect("no skipped variants");
                f.write_str(v.get_name())
            }
        }

        impl FromStr for $t {
            type Err = UsageError;
            fn from_str(s: &str) -> Result<Self, UsageError> {
                <$t as ValueEnum>::from_str(s, false)
                    .map_err(|_| UsageError::Invalid(format!("unknown {} value '{s}'", stringify!($t))))
            }
        }
    )*};
}

value_enum_text!(CommandKind, Format, StateKind);

#[derive(Parser, Debug, Default, Clone)]
#[command(name = "qudit-learn", version, about = "Seeded qudit amplitude-learning and shadow experiments")]
pub struct Cli {
    /// Command to run; may instead be given as `command=` in the config file.
    pub command: Option<CommandKind>,
    /// Prime local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated prime dimensions for verify, scaling, twirl and norms.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Shadow samples per run.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub state: Option<StateKind>,
    /// Comma-separated scaling protocols.
    #[arg(long)]
    pub protocols: Option<String>,
    /// Largest sample size probed by scaling.
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<Format>,
    /// Worker threads; defaults to QUDIT_LEARN_WORKERS, then 1.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value.parse().map_err(|_| UsageError::Invalid(format!("cannot parse {key} = '{value}'")))
}

impl Cli {
    /// Options read from a config file, keyed by long flag name.
    pub fn from_config_text(text: &str) -> Result<Cli, UsageError> {
        let mut cli = Cli::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError::Invalid(format!("config line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim().replace('-', "_"), value.trim());
            match key.as_str() {
                "command" => cli.command = Some(value.parse()?),
                "d" => cli.d = Some(parse_value(&key, value)?),
                "dims" => cli.dims = Some(value.to_string()),
                "eps" | "epsilon" => cli.eps = Some(parse_value(&key, value)?),
                "delta" => cli.delta = Some(parse_value(&key, value)?),
                "seed" => cli.seed = Some(parse_value(&key, value)?),
                "trials" => cli.trials = Some(parse_value(&key, value)?),
                "samples" => cli.samples = Some(parse_value(&key, value)?),
                "state" => cli.state = Some(value.parse()?),
                "protocols" => cli.protocols = Some(value.to_string()),
                "max_samples" => cli.max_samples = Some(parse_value(&key, value)?),
                "out" | "output_path" => cli.out = Some(PathBuf::from(value)),
                "format" => cli.format = Some(value.parse()?),
                "workers" => cli.workers = Some(parse_value(&key, value)?),
                _ => return Err(UsageError::Invalid(format!("config line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        Ok(cli)
    }

    pub fn from_config_file(path: &Path) -> Result<Cli, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Cli::from_config_text(&text)
    }

    /// `self` with gaps filled from `base`.
    pub fn over(self, base: Cli) -> Cli {
        Cli {
            command: self.command.or(base.command),
            d: self.d.or(base.d),
            dims: self.dims.or(base.dims),
            eps: self.eps.or(base.eps),
            delta: self.delta.or(base.delta),
            seed: self.seed.or(base.seed),
            trials: self.trials.or(base.trials),
            samples: self.samples.or(base.samples),
            state: self.state.or(base.state),
            protocols: self.protocols.or(base.protocols),
            max_samples: self.max_samples.or(base.max_samples),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            workers: self.workers.or(base.workers),
            config: self.config.or(base.config),
        }
    }
}

/// Fully resolved run parameters.
///
/// The output path and worker count do not change results and are left out of
/// the serialized echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub d: usize,
    pub dims: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub trials: usize,
    pub samples: usize,
    pub state: StateKind,
    pub protocols: Vec<ProtocolKind>,
    pub max_samples: usize,
    pub format: Format,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub workers: usize,
}

fn prime(d: usize) -> Result<Dimension, UsageError> {
    Dimension::new(d).map_err(|e| UsageError::Invalid(e.to_string()))
}

fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>, UsageError> {
    let items: Vec<T> =
        text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(key, s)).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(UsageError::Invalid(format!("{key} must list at least one value")));
    }
    Ok(items)
}

fn open_unit(name: &str, x: f64) -> Result<f64, UsageError> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(UsageError::Invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}

impl RunConfig {
    /// Merges the config file under the flags and validates.
    pub fn from_cli(flags: Cli) -> Result<RunConfig, UsageError> {
        let merged = match &flags.config {
            Some(path) => {
                let file = Cli::from_config_file(path)?;
                flags.over(file)
            }
            None => flags,
        };
        let env_workers = std::env::var(WORKERS_ENV).ok();
        RunConfig::resolve(merged, env_workers.as_deref())
    }

    pub fn resolve(cli: Cli, env_workers: Option<&str>) -> Result<RunConfig, UsageError> {
        let command = cli.command.ok_or(UsageError::MissingCommand)?;
        let d = cli.d.unwrap_or(3);
        prime(d)?;
        let dims = match (&cli.dims, cli.d) {
            (Some(text), _) => parse_list::<usize>("dims", text)?,
            (None, Some(d)) => vec![d],
            (None, None) => match command {
                CommandKind::Verify => vec![2, 3, 5, 7],
                CommandKind::Scaling => vec![3, 5, 7, 11, 13],
                CommandKind::Twirl => vec![2, 3, 5],
                CommandKind::Norms => vec![3, 5],
                CommandKind::Learn | CommandKind::Shadows => vec![d],
            },
        };
        for &n in &dims {
            prime(n)?;
        }
        let default_eps = if command == CommandKind::Scaling { 0.5 } else { 0.3 };
        let epsilon = open_unit("eps", cli.eps.unwrap_or(default_eps))?;
        let delta = open_unit("delta", cli.delta.unwrap_or(0.1))?;
        let trials = cli.trials.unwrap_or(match command {
            CommandKind::Scaling => 200,
            CommandKind::Learn => 10,
            _ => 1,
        });
        if trials == 0 {
            return Err(UsageError::Invalid("trials must be positive".into()));
        }
        let samples = cli.samples.unwrap_or(2000);
        if samples == 0 {
            return Err(UsageError::Invalid("samples must be positive".into()));
        }
        let protocols = match &cli.protocols {
            Some(text) => parse_list::<ProtocolKind>("protocols", text)?,
            None => ProtocolKind::ALL.to_vec(),
        };
        let workers = match cli.workers {
            Some(w) => w,
            None => match env_workers {
                Some(text) => parse_value(WORKERS_ENV, text)?,
                None => 1,
            },
        };
        if workers == 0 {
            return Err(UsageError::Invalid("workers must be positive".into()));
        }
        Ok(RunConfig {
            command,
            d,
            dims,
            epsilon,
            delta,
            seed: cli.seed.unwrap_or(1),
            trials,
            samples,
            state: cli.state.unwrap_or_default(),
            protocols,
            max_samples: cli.max_samples.unwrap_or(1 << 20),
            format: cli.format.unwrap_or_default(),
            output_path: cli.out,
            workers,
        })
    }

    pub fn dimension(&self) -> Dimension {
        Dimension::new(self.d).expect("validated at construction")
    }

    pub fn dimensions(&self) -> Vec<Dimension> {
        self.dims.iter().map(|&n| Dimension::new(n).expect("validated at construction")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(command: CommandKind) -> Cli {
        Cli { command: Some(command), ..Cli::default() }
    }

    #[test]
    fn flags_override_file() {
        let file = Cli::from_config_text("command = learn\nd = 5\n# comment\neps=0.2\nseed = 9").unwrap();
        let flags = Cli { d: Some(7), ..Cli::default() };
        let cfg = RunConfig::resolve(flags.over(file), None).unwrap();
        assert_eq!(cfg.command, CommandKind::Learn);
        assert_eq!(cfg.d, 7);
        assert_eq!(cfg.epsilon, 0.2);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn composite_dimension_is_rejected() {
        let err = RunConfig::resolve(Cli { d: Some(4), ..cli(CommandKind::Verify) }, None).unwrap_err();
        assert!(err.to_string().contains("d must be prime"), "{err}");
        let err = RunConfig::resolve(Cli { dims: Some("3,9".into()), ..cli(CommandKind::Scaling) }, None).unwrap_err();
        assert!(err.to_string().contains("d must be prime"));
    }

    #[test]
    fn ranges_are_checked() {
        assert!(RunConfig::resolve(Cli { eps: Some(1.0), ..cli(CommandKind::Learn) }, None).is_err());
        assert!(RunConfig::resolve(Cli { delta: Some(0.0), ..cli(CommandKind::Learn) }, None).is_err());
        assert!(RunConfig::resolve(Cli { trials: Some(0), ..cli(CommandKind::Learn) }, None).is_err());
        assert!(RunConfig::resolve(cli(CommandKind::Learn), Some("0")).is_err());
        assert!(matches!(RunConfig::resolve(Cli::default(), None), Err(UsageError::MissingCommand)));
    }

    #[test]
    fn unknown_config_key() {
        let err = Cli::from_config_text("colour = blue").unwrap_err();
        assert!(err.to_string().contains("unknown key 'colour'"));
    }

    #[test]
    fn worker_precedence() {
        assert_eq!(RunConfig::resolve(cli(CommandKind::Twirl), Some("3")).unwrap().workers, 3);
        let flags = Cli { workers: Some(2), ..cli(CommandKind::Twirl) };
        assert_eq!(RunConfig::resolve(flags, Some("3")).unwrap().workers, 2);
    }

    #[test]
    fn command_defaults() {
        let scaling = RunConfig::resolve(cli(CommandKind::Scaling), None).unwrap();
        assert_eq!(scaling.dims, vec![3, 5, 7, 11, 13]);
        assert_eq!(scaling.trials, 200);
        assert_eq!(scaling.epsilon, 0.5);
        let verify = RunConfig::resolve(Cli { d: Some(3), ..cli(CommandKind::Verify) }, None).unwrap();
        assert_eq!(verify.dims, vec![3]);
        assert_eq!("single_copy_shadow".parse::<ProtocolKind>().unwrap(), ProtocolKind::SingleCopyShadow);
        assert_eq!("haar_pure".parse::<StateKind>().unwrap(), StateKind::HaarPure);
    }
}
