use std::cmp::Ordering;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::grid::{count, expand, number, required, scaled, text, Axis, Grid, GridValue, Point};
use super::CliError;
use crate::bounds::{generalization_bound, theorem1_moment_bound, BoundInputs, BoundKind};
use crate::chaos::{
    chaos_lp_with, lower_ratio_with, paley_zygmund_certificate_collapsed, ChaosParams,
};
use crate::oracle::{BinomialWeights, Provenance};
use crate::partition::{verify_level_bounds, verify_telescoping};
use crate::stability_lab::{
    default_distribution, gap_quantiles, resolve_gamma, simulate, CorrelationReport, LearnerSpec,
    SandwichReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bounds,
    Chaos,
    Partition,
    Learn,
    Tails,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Chaos => "chaos",
            Command::Partition => "partition",
            Command::Learn => "learn",
            Command::Tails => "tails",
        }
    }

    /// Whether the command draws random samples and needs a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Learn | Command::Tails)
    }

    fn axes(self) -> Vec<Axis> {
        let lambda = Axis {
            key: "lambda",
            default: Some(GridValue::Num(1.0)),
        };
        match self {
            Command::Bounds => vec![
                required("n"),
                required("gamma"),
                required("delta"),
                Axis {
                    key: "l",
                    default: Some(GridValue::Num(1.0)),
                },
            ],
            Command::Chaos | Command::Partition => {
                vec![
                    required("n"),
                    required("m"),
                    required("beta"),
                    required("p"),
                ]
            }
            Command::Learn => vec![required("learner"), required("n"), lambda],
            Command::Tails => vec![
                required("learner"),
                required("n"),
                required("delta"),
                lambda,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn cmp_key(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Float(a), Cell::Float(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Bool(a), Cell::Bool(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub command: Command,
    pub params: Vec<(&'static str, Cell)>,
    pub values: Vec<(&'static str, Cell)>,
    pub provenance: Provenance,
    pub passed: bool,
}

impl ResultRow {
    pub fn cmp_params(&self, other: &ResultRow) -> Ordering {
        self.params
            .iter()
            .zip(&other.params)
            .map(|((_, a), (_, b))| a.cmp_key(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }

    pub fn value(&self, name: &str) -> Option<&Cell> {
        self.values.iter().find(|(k, _)| *k == name).map(|(_, c)| c)
    }
}

/// Settings shared by every grid point.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub reps: usize,
}

pub fn grid_points(command: Command, grid: &Grid) -> Result<Vec<Point>, CliError> {
    expand(grid, &command.axes())
}

pub fn run_point(
    command: Command,
    point: &Point,
    settings: RunSettings,
) -> Result<ResultRow, CliError> {
    match command {
        Command::Bounds => bounds_row(point),
        Command::Chaos => chaos_row(point),
        Command::Partition => partition_row(point),
        Command::Learn => learn_row(point, settings),
        Command::Tails => tails_row(point, settings),
    }
}

fn bounds_row(point: &Point) -> Result<ResultRow, CliError> {
    let n = count(point, "n")?;
    let gamma = scaled(point, "gamma", n)?;
    let delta = number(point, "delta")?;
    let l = number(point, "l")?;
    let input = BoundInputs::new(n, delta)
        .with_gamma(gamma)
        .with_loss_bound(l);
    let mut values = Vec::new();
    let mut by_kind = [0.0; 4];
    for (slot, kind) in by_kind.iter_mut().zip(BoundKind::GENERALIZATION) {
        *slot = generalization_bound(kind, &input)?.value;
        values.push((kind.as_str(), Cell::Float(*slot)));
    }
    // bkz never exceeds fv2019 term by term.
    let ordered = by_kind[3] <= by_kind[2];
    values.push(("bkz_le_fv2019", Cell::Bool(ordered)));
    Ok(ResultRow {
        command: Command::Bounds,
        params: vec![
            ("n", Cell::Int(n as u64)),
            ("gamma", Cell::Float(gamma)),
            ("delta", Cell::Float(delta)),
            ("l", Cell::Float(l)),
        ],
        values,
        provenance: Provenance::Exact,
        passed: ordered,
    })
}

fn chaos_params(point: &Point) -> Result<(ChaosParams, f64), CliError> {
    let n = count(point, "n")?;
    let params = ChaosParams::new(n, number(point, "m")?, scaled(point, "beta", n)?)?;
    if params.m == 0.0 && params.beta == 0.0 {
        return Err(CliError::Config("chaos needs (m, beta) != (0, 0)".into()));
    }
    Ok((params, number(point, "p")?))
}

fn chaos_param_cells(params: &ChaosParams, p: f64) -> Vec<(&'static str, Cell)> {
    vec![
        ("n", Cell::Int(params.n as u64)),
        ("m", Cell::Float(params.m)),
        ("beta", Cell::Float(params.beta)),
        ("p", Cell::Float(p)),
    ]
}

fn chaos_row(point: &Point) -> Result<ResultRow, CliError> {
    let (params, p) = chaos_params(point)?;
    let weights = BinomialWeights::new(params.n)?;
    let norm_p = chaos_lp_with(&weights, &params, p)?;
    let bound = theorem1_moment_bound(p, params.n, params.beta, params.m)?.value;
    let ratio = if p <= params.n as f64 {
        lower_ratio_with(&weights, &params, p)?
    } else {
        f64::NAN
    };
    let cert = paley_zygmund_certificate_collapsed(&params, p)?;
    let dominated = norm_p <= bound;
    Ok(ResultRow {
        command: Command::Chaos,
        params: chaos_param_cells(&params, p),
        values: vec![
            ("norm_p", Cell::Float(norm_p)),
            ("norm_2p", Cell::Float(cert.norm_2p)),
            ("theorem1", Cell::Float(bound)),
            ("dominated", Cell::Bool(dominated)),
            ("lower_ratio", Cell::Float(ratio)),
            ("pz_lhs", Cell::Float(cert.lhs)),
            ("pz_rhs", Cell::Float(cert.rhs)),
            ("pz_valid", Cell::Bool(cert.is_valid())),
        ],
        provenance: Provenance::Exact,
        passed: dominated && cert.is_valid(),
    })
}

fn partition_row(point: &Point) -> Result<ResultRow, CliError> {
    let (params, p) = chaos_params(point)?;
    let tele = verify_telescoping(&params)?;
    let levels = verify_level_bounds(&params, p)?;
    Ok(ResultRow {
        command: Command::Partition,
        params: chaos_param_cells(&params, p),
        values: vec![
            ("telescoping_deviation", Cell::Float(tele.max_deviation)),
            ("telescoping_passed", Cell::Bool(tele.passed)),
            ("bound_violations", Cell::Int(levels.violations as u64)),
            ("total_exact", Cell::Float(levels.total_exact)),
            ("assembled", Cell::Float(levels.assembled)),
            ("theorem1", Cell::Float(levels.theorem1)),
        ],
        provenance: Provenance::Exact,
        passed: tele.passed && levels.passed(),
    })
}

fn learner(point: &Point) -> Result<LearnerSpec, CliError> {
    let lambda = number(point, "lambda")?;
    let spec = match text(point, "learner")? {
        "constant" => LearnerSpec::constant(0.5, crate::stability_lab::Loss::ZeroOne),
        "clipped_mean" => LearnerSpec::clipped_mean(),
        "memorizer" => LearnerSpec::memorizer(),
        "regularized_mean" => LearnerSpec::regularized_mean(lambda),
        other => {
            return Err(CliError::Config(format!(
                "unknown learner {other:?}; expected constant, clipped_mean, memorizer or regularized_mean"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn learner_param_cells(spec: &LearnerSpec, n: usize, lambda: f64) -> Vec<(&'static str, Cell)> {
    vec![
        ("learner", Cell::Text(spec.name().to_string())),
        ("n", Cell::Int(n as u64)),
        ("lambda", Cell::Float(lambda)),
    ]
}

fn seed(settings: RunSettings) -> Result<u64, CliError> {
    settings
        .seed
        .ok_or_else(|| CliError::Config("stochastic commands need a seed".into()))
}

fn learn_row(point: &Point, settings: RunSettings) -> Result<ResultRow, CliError> {
    let spec = learner(point)?;
    let n = count(point, "n")?;
    let seed = seed(settings)?;
    let dist = default_distribution(&spec);
    let gamma = resolve_gamma(&spec, &dist, n, settings.reps, seed)?;
    let samples = simulate(&spec, &dist, n, settings.reps, seed)?;
    let mut violations = 0u64;
    let mut worst = 0.0f64;
    for s in &samples {
        let r = SandwichReport::from_parts(s.gap, &s.g_values, gamma.gamma, spec.l);
        violations += u64::from(!r.holds);
        worst = worst.max(r.deviation);
    }
    let corr = CorrelationReport::from_samples(&spec, n, gamma, &samples);
    let mean = |f: fn(&crate::stability_lab::GapSample) -> f64| {
        let v: Vec<f64> = samples.iter().map(f).collect();
        crate::oracle::pairwise_sum(&v) / v.len() as f64
    };
    Ok(ResultRow {
        command: Command::Learn,
        params: learner_param_cells(&spec, n, number(point, "lambda")?),
        values: vec![
            ("gamma", Cell::Float(gamma.gamma)),
            ("gamma_mode", Cell::Text(gamma.mode.as_str().to_string())),
            ("mean_gap", Cell::Float(mean(|s| s.gap))),
            ("mean_gap_loo", Cell::Float(mean(|s| s.gap_loo))),
            ("sandwich_bound", Cell::Float(2.0 * gamma.gamma * n as f64)),
            ("sandwich_max_deviation", Cell::Float(worst)),
            ("sandwich_violations", Cell::Int(violations)),
            ("pair_mean", Cell::Float(corr.pair_mean)),
            ("pair_se", Cell::Float(corr.pair_se)),
            ("pair_bound", Cell::Float(corr.pair_bound)),
            ("pair_holds", Cell::Bool(corr.pair_holds)),
            ("gap_variance", Cell::Float(corr.gap_variance)),
            ("variance_se", Cell::Float(corr.variance_se)),
            ("variance_bound", Cell::Float(corr.variance_bound)),
            ("variance_holds", Cell::Bool(corr.variance_holds)),
        ],
        provenance: Provenance::MonteCarlo,
        passed: violations == 0 && corr.passed(),
    })
}

fn tails_row(point: &Point, settings: RunSettings) -> Result<ResultRow, CliError> {
    let spec = learner(point)?;
    let n = count(point, "n")?;
    let delta = number(point, "delta")?;
    let dist = default_distribution(&spec);
    let table = gap_quantiles(&spec, &dist, n, settings.reps, &[delta], seed(settings)?)?;
    let row = table.rows[0];
    let mut params = learner_param_cells(&spec, n, number(point, "lambda")?);
    params.insert(2, ("delta", Cell::Float(delta)));
    Ok(ResultRow {
        command: Command::Tails,
        params,
        values: vec![
            ("gamma", Cell::Float(table.gamma)),
            (
                "gamma_mode",
                Cell::Text(table.gamma_mode.as_str().to_string()),
            ),
            ("quantile", Cell::Float(row.quantile)),
            ("bousquet02", Cell::Float(row.bousquet02)),
            ("fv2018", Cell::Float(row.fv2018)),
            ("fv2019", Cell::Float(row.fv2019)),
            ("bkz", Cell::Float(row.bkz)),
            ("stability_tail", Cell::Float(row.stability_tail)),
            ("margin", Cell::Float(row.margin)),
            ("dominated", Cell::Bool(row.dominated)),
        ],
        provenance: Provenance::MonteCarlo,
        passed: row.dominated,
    })
}
