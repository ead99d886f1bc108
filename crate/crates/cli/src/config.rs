//! Plain-text `key = value` backtest configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error so that
//! typos do not silently fall back to defaults.

use std::path::{Path, PathBuf};

use eqdrift::data::DateRange;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BacktestFile {
    pub window_days: Option<usize>,
    pub reestimate_every: Option<usize>,
    pub factorization: Option<String>,
    pub target: Option<PathBuf>,
    pub exposure: Option<f64>,
    pub rf_annual: Option<f64>,
    /// `Some(vec![])` means exclusions were explicitly turned off.
    pub exclude: Option<Vec<DateRange>>,
    pub shrinkage: Option<f64>,
    pub drop_assets: Option<Vec<String>>,
    pub date_range: Option<DateRange>,
    pub format: Option<String>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::Config {
        line,
        message: format!("bad value {v:?} for {key}"),
    })
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split([',', ';']).map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_backtest_config(text: &str, base_dir: &Path) -> CliResult<BacktestFile> {
    let mut cfg = BacktestFile::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| CliError::Config {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "window_days" => cfg.window_days = Some(parse_value(line, key, value)?),
            "reestimate_every" => cfg.reestimate_every = Some(parse_value(line, key, value)?),
            "factorization" => cfg.factorization = Some(value.to_string()),
            "target" => cfg.target = Some(base_dir.join(value)),
            "exposure" => cfg.exposure = Some(parse_value(line, key, value)?),
            "rf_annual" => cfg.rf_annual = Some(parse_value(line, key, value)?),
            "exclude" => {
                cfg.exclude = Some(if value.eq_ignore_ascii_case("none") {
                    Vec::new()
                } else {
                    list(value)
                        .map(|r| {
                            r.parse()
                                .map_err(|m: String| CliError::Config { line, message: m })
                        })
                        .collect::<CliResult<_>>()?
                })
            }
            "shrinkage" => cfg.shrinkage = Some(parse_value(line, key, value)?),
            "drop_assets" => cfg.drop_assets = Some(list(value).map(String::from).collect()),
            "date_range" => {
                cfg.date_range = Some(
                    value
                        .parse()
                        .map_err(|m: String| CliError::Config { line, message: m })?,
                )
            }
            "format" => cfg.format = Some(value.to_string()),
            other => {
                return Err(CliError::Config {
                    line,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    Ok(cfg)
}

pub fn load_backtest_config(path: &Path) -> CliResult<BacktestFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_backtest_config(&text, path.parent().unwrap_or(Path::new(".")))
}
