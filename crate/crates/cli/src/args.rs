use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ergocap::covopt::CovOptions;
use ergocap::montecarlo::DEFAULT_SEED;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Nats,
    Bits,
}

impl Unit {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Self::Nats => nats,
            Self::Bits => nats / std::f64::consts::LN_2,
        }
    }

    /// Column name for a rate, e.g. `capacity_nats`.
    pub fn column(self, name: &str) -> String {
        match self {
            Self::Nats => format!("{name}_nats"),
            Self::Bits => format!("{name}_bits"),
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Unit::Nats)]
    pub unit: Unit,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SnrArgs {
    /// SNR in dB: `a:b:step`, a comma list, or one value.
    #[arg(long = "snr-db", conflicts_with = "snr", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Linear SNR: a comma list or one value.
    #[arg(long)]
    pub snr: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrPoint {
    pub db: Option<f64>,
    pub linear: f64,
}

impl SnrArgs {
    /// Grid points, falling back to `default_db` when no flag is given.
    pub fn points(&self, default_db: &str) -> Result<Vec<SnrPoint>, CliError> {
        let points: Vec<SnrPoint> = match (&self.snr_db, &self.snr) {
            (_, Some(lin)) => parse_list(lin, "--snr")?
                .into_iter()
                .map(|v| SnrPoint {
                    db: None,
                    linear: v,
                })
                .collect(),
            (db, None) => parse_grid(db.as_deref().unwrap_or(default_db), "--snr-db")?
                .into_iter()
                .map(|d| SnrPoint {
                    db: Some(d),
                    linear: 10f64.powf(d / 10.0),
                })
                .collect(),
        };
        if let Some(p) = points
            .iter()
            .find(|p| !(p.linear > 0.0 && p.linear.is_finite()))
        {
            return Err(CliError::usage(format!(
                "SNR must be positive and finite, got {}",
                p.linear
            )));
        }
        Ok(points)
    }
}

/// `a:b:step` (inclusive), `x,y,z` or a single number.
pub fn parse_grid(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (number(a, flag)?, number(b, flag)?, number(step, flag)?);
            if !(step > 0.0) || b < a {
                return Err(CliError::usage(format!(
                    "{flag}: need a ≤ b and step > 0 in a:b:step"
                )));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(CliError::usage(format!("{flag}: grid has too many points")));
            }
            Ok((0..n).map(|k| a + k as f64 * step).collect())
        }
        [_] => parse_list(text, flag),
        _ => Err(CliError::usage(format!(
            "{flag}: expected a:b:step or a comma list, got {text:?}"
        ))),
    }
}

pub fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',').map(|s| number(s, flag)).collect()
}

pub fn parse_sizes(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::usage(format!(
                "{flag}: expected positive integers, got {s:?}"
            ))),
        })
        .collect()
}

fn number(s: &str, flag: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::usage(format!("{flag}: not a number: {s:?}")))
}

#[derive(Args, Clone, Debug, Default)]
pub struct SolverArgs {
    /// Monte Carlo samples per expectation.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Solver options as JSON (path or inline); explicit flags take precedence.
    #[arg(long)]
    pub options: Option<String>,
}

impl SolverArgs {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn cov_options(&self) -> Result<CovOptions, CliError> {
        let mut opts = match &self.options {
            Some(src) => CovOptions::from_json(&read_inline_or_file(src)?)?,
            None => CovOptions::default(),
        };
        if let Some(s) = self.samples {
            opts.samples = s;
        }
        if let Some(s) = self.seed {
            opts.seed = s;
        }
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(k) = self.max_iter {
            opts.max_iter = k;
        }
        opts.validate()?;
        Ok(opts)
    }
}

/// Inline JSON when the text starts with `{`, otherwise a file path.
pub fn read_inline_or_file(src: &str) -> Result<String, CliError> {
    if src.trim_start().starts_with('{') {
        return Ok(src.to_string());
    }
    std::fs::read_to_string(src).map_err(|e| CliError::usage(format!("cannot read {src}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(
            parse_grid("-10:30:10", "x").unwrap(),
            vec![-10.0, 0.0, 10.0, 20.0, 30.0]
        );
        assert_eq!(parse_grid("0:1:0.1", "x").unwrap().len(), 11);
        assert_eq!(parse_grid("3", "x").unwrap(), vec![3.0]);
        assert_eq!(parse_grid("1,2.5", "x").unwrap(), vec![1.0, 2.5]);
    }

    #[test]
    fn bad_grids() {
        for s in ["1:0:1", "0:1:0", "a", "1:2", "0:1:-1", "nan"] {
            assert!(parse_grid(s, "x").is_err(), "{s}");
        }
    }

    #[test]
    fn db_conversion() {
        let args = SnrArgs {
            snr_db: Some("-10,0,10".into()),
            snr: None,
        };
        let p = args.points("0").unwrap();
        assert!(
            (p[0].linear - 0.1).abs() < 1e-15
                && p[1].linear == 1.0
                && (p[2].linear - 10.0).abs() < 1e-12
        );
        let lin = SnrArgs {
            snr_db: None,
            snr: Some("0".into()),
        };
        assert!(lin.points("0").is_err());
    }

    #[test]
    fn flags_override_options() {
        let s = SolverArgs {
            tol: Some(1e-3),
            options: Some(r#"{"samples": 123, "tol": 0.5}"#.into()),
            ..Default::default()
        };
        let o = s.cov_options().unwrap();
        assert_eq!((o.samples, o.tol), (123, 1e-3));
    }
}
