use std::fmt::Write as _;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::commands::{Cell, Command, ResultRow};
use crate::oracle::GENERATOR_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Provenance of a stochastic run, written into the output header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunHeader {
    pub seed: u64,
    pub reps: usize,
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) if v.is_nan() => "NaN".to_string(),
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Text(s) => s.clone(),
        Cell::Bool(b) => b.to_string(),
    }
}

fn json_cell(cell: &Cell) -> Value {
    match cell {
        Cell::Int(v) => json!(v),
        Cell::Float(v) => json!(v),
        Cell::Text(s) => json!(s),
        Cell::Bool(b) => json!(b),
    }
}

/// Renders rows as CSV (LF endings, 17 significant digits) or JSON.
pub fn render(
    command: Command,
    rows: &[ResultRow],
    header: Option<RunHeader>,
    format: Format,
) -> String {
    match format {
        Format::Csv => render_csv(command, rows, header),
        Format::Json => render_json(command, rows, header),
    }
}

fn render_csv(command: Command, rows: &[ResultRow], header: Option<RunHeader>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(
            out,
            "# seed={},reps={},generator={}",
            h.seed, h.reps, GENERATOR_ID
        );
    }
    let mut columns = vec!["command"];
    if let Some(first) = rows.first() {
        columns.extend(first.params.iter().map(|(k, _)| *k));
        columns.extend(first.values.iter().map(|(k, _)| *k));
    }
    columns.extend(["provenance", "passed"]);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let mut fields = vec![command.as_str().to_string()];
        fields.extend(row.params.iter().map(|(_, c)| csv_cell(c)));
        fields.extend(row.values.iter().map(|(_, c)| csv_cell(c)));
        fields.push(row.provenance.as_str().to_string());
        fields.push(row.passed.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn render_json(command: Command, rows: &[ResultRow], header: Option<RunHeader>) -> String {
    let rows: Vec<Value> = rows
        .iter()
        .map(|row| {
            let params: Map<String, Value> = row
                .params
                .iter()
                .map(|(k, c)| (k.to_string(), json_cell(c)))
                .collect();
            let values: Map<String, Value> = row
                .values
                .iter()
                .map(|(k, c)| (k.to_string(), json_cell(c)))
                .collect();
            json!({
                "params": params,
                "values": values,
                "provenance": row.provenance.as_str(),
                "passed": row.passed,
            })
        })
        .collect();
    let mut doc = json!({ "command": command.as_str(), "rows": rows });
    if let Some(h) = header {
        doc["seed"] = json!(h.seed);
        doc["reps"] = json!(h.reps);
        doc["generator"] = json!(GENERATOR_ID);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    text.push('\n');
    text
}
