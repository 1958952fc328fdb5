use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CliError;

/// A grid entry: a number, or a string such as `"1/n"` or a learner name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Num(f64),
    Text(String),
}

impl GridValue {
    /// Parses a command-line token: a number when it parses as one.
    pub fn parse(token: &str) -> GridValue {
        let token = token.trim();
        match token.parse::<f64>() {
            Ok(v) => GridValue::Num(v),
            Err(_) => GridValue::Text(token.to_string()),
        }
    }
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Num(v) => write!(f, "{v}"),
            GridValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Grid = BTreeMap<String, Vec<GridValue>>;

/// Parses `key=v1,v2,...`.
pub fn parse_grid_flag(flag: &str) -> Result<(String, Vec<GridValue>), CliError> {
    let (key, values) = flag
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--grid expects key=v1,v2, got {flag:?}")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!(
            "--grid has an empty key in {flag:?}"
        )));
    }
    let values: Vec<GridValue> = values
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(GridValue::parse)
        .collect();
    Ok((key.to_string(), values))
}

/// One grid axis: its key and the default used when the grid omits it.
pub struct Axis {
    pub key: &'static str,
    pub default: Option<GridValue>,
}

pub const fn required(key: &'static str) -> Axis {
    Axis { key, default: None }
}

/// A point of the cartesian product, in axis order.
pub type Point = Vec<(&'static str, GridValue)>;

/// Expands `grid` over `axes` in row-major order. Keys outside `axes`,
/// missing required keys and empty value lists are configuration errors.
pub fn expand(grid: &Grid, axes: &[Axis]) -> Result<Vec<Point>, CliError> {
    if let Some(key) = grid
        .keys()
        .find(|k| axes.iter().all(|a| a.key != k.as_str()))
    {
        let known: Vec<&str> = axes.iter().map(|a| a.key).collect();
        return Err(CliError::Config(format!(
            "unknown grid key {key:?}; expected one of {known:?}"
        )));
    }
    let mut columns = Vec::with_capacity(axes.len());
    for axis in axes {
        let values = match (grid.get(axis.key), &axis.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => vec![d.clone()],
            (None, None) => {
                return Err(CliError::Config(format!("grid is missing {:?}", axis.key)));
            }
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("grid {:?} is empty", axis.key)));
        }
        columns.push((axis.key, values));
    }
    let mut points: Vec<Point> = vec![Vec::new()];
    for (key, values) in &columns {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((*key, v.clone()));
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

fn lookup<'a>(point: &'a Point, key: &str) -> &'a GridValue {
    &point
        .iter()
        .find(|(k, _)| *k == key)
        .expect("expanded point carries every axis")
        .1
}

pub fn number(point: &Point, key: &str) -> Result<f64, CliError> {
    match lookup(point, key) {
        GridValue::Num(v) if v.is_finite() => Ok(*v),
        other => Err(CliError::Config(format!(
            "{key} must be a finite number, got {other}"
        ))),
    }
}

pub fn count(point: &Point, key: &str) -> Result<usize, CliError> {
    let v = number(point, key)?;
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(CliError::Config(format!(
            "{key} must be a positive integer, got {v}"
        )));
    }
    Ok(v as usize)
}

pub fn text<'a>(point: &'a Point, key: &str) -> Result<&'a str, CliError> {
    match lookup(point, key) {
        GridValue::Text(s) => Ok(s),
        other => Err(CliError::Config(format!(
            "{key} must be a string, got {other}"
        ))),
    }
}

/// A number, `"1/n"` or `"1/sqrt(n)"`, resolved at sample size `n`.
pub fn scaled(point: &Point, key: &str, n: usize) -> Result<f64, CliError> {
    match lookup(point, key) {
        GridValue::Num(_) => number(point, key),
        GridValue::Text(s) => match s.replace(' ', "").as_str() {
            "1/n" => Ok(1.0 / n as f64),
            "1/sqrt(n)" => Ok(1.0 / (n as f64).sqrt()),
            other => Err(CliError::Config(format!(
                "{key}: expected a number, \"1/n\" or \"1/sqrt(n)\", got {other:?}"
            ))),
        },
    }
}
