use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.11e}"),
            Cell::Text(s) => (*s).to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Vec<Cell>>) {
        for row in rows {
            self.push(row);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Table(Table),
    Json(Value),
}

/// Serializes `output` with the run record: a `# config:` comment line
/// ahead of CSV, or a `config` key in JSON.
pub fn render(output: &Output, record: &Value, format: Format) -> CliResult<String> {
    match (output, format) {
        (Output::Table(table), Format::Csv) => {
            let mut text = format!("# config: {record}\n{}\n", table.columns.join(","));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            Ok(text)
        }
        (Output::Table(table), Format::Json) => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| Value::Array(row.iter().map(Cell::json).collect()))
                .collect();
            Ok(pretty(
                &json!({ "config": record, "columns": table.columns, "rows": rows }),
            ))
        }
        (Output::Json(value), Format::Json) => {
            Ok(pretty(&json!({ "config": record, "result": value })))
        }
        (Output::Json(_), Format::Csv) => {
            Err(CliError::Config("this command only writes JSON".into()))
        }
    }
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).unwrap_or_default();
    text.push('\n');
    text
}

pub fn write(text: &str, out: Option<&Path>) -> CliResult<()> {
    let result = match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|source| CliError::Io {
        path: out.map_or_else(|| "stdout".into(), |p| p.display().to_string()),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_starts_with_config_then_header() {
        let mut t = Table::new(&["r", "q"]);
        t.push(vec![Cell::Num(0.5), Cell::Num(-1.0 / 3.0)]);
        let text = render(&Output::Table(t), &json!({"command": "x"}), Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"# config: {"command":"x"}"#);
        assert_eq!(lines[1], "r,q");
        assert_eq!(lines[2], "5.00000000000e-1,-3.33333333333e-1");
    }

    #[test]
    fn json_only_output_rejects_csv() {
        assert!(render(&Output::Json(json!({})), &json!({}), Format::Csv).is_err());
    }
}
