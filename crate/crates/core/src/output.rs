//! Tabular output: CSV with `#` metadata lines, JSON with a `meta` object,
//! and generated matplotlib scripts that read the CSV back.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!(
                "format must be 'csv' or 'json', got '{other}'"
            ))),
        }
    }
}

/// Column-oriented numeric table with ordered metadata and summary lines.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub summary: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra structured data for the JSON form only.
    pub details: Option<Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn summary(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.summary.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.meta.iter().chain(&self.summary) {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_number(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let pairs = |list: &[(String, String)]| {
            list.iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect::<Map<_, _>>()
        };
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|x| json_number(*x)).collect()))
            .collect();
        let mut doc = json!({
            "meta": pairs(&self.meta),
            "summary": pairs(&self.summary),
            "columns": self.columns,
            "rows": rows,
        });
        if let Some(details) = &self.details {
            doc["details"] = details.clone();
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("table serialises");
        text.push('\n');
        text
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Shortest round-trip representation; identical bytes for identical values.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// What to draw from a CSV file.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub ys: Vec<String>,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Scale applied to the x column before plotting.
    pub x_scale: f64,
}

/// Python script plotting `csv_path` with matplotlib.
pub fn plot_script(csv_path: &str, spec: &PlotSpec) -> String {
    let ys: Vec<String> = spec.ys.iter().map(|y| format!("{y:?}")).collect();
    let mut s = String::new();
    let _ = writeln!(s, "import numpy as np");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "path = {csv_path:?}");
    let _ = writeln!(s, "with open(path) as fh:");
    let _ = writeln!(s, "    skip = sum(1 for line in fh if line.startswith(\"#\"))");
    let _ = writeln!(
        s,
        "data = np.genfromtxt(path, delimiter=\",\", names=True, skip_header=skip)"
    );
    let _ = writeln!(s, "x = data[{:?}] * {:e}", spec.x, spec.x_scale);
    let _ = writeln!(s, "fig, ax = plt.subplots()");
    let _ = writeln!(s, "for col in [{}]:", ys.join(", "));
    let _ = writeln!(
        s,
        "    ax.plot(x, data[col], marker=\".\" if len(x) < 400 else None, label=col)"
    );
    if spec.log_y {
        let _ = writeln!(s, "ax.set_yscale(\"log\")");
    }
    let _ = writeln!(s, "ax.set_xlabel({:?})", spec.x_label);
    let _ = writeln!(s, "ax.set_ylabel({:?})", spec.y_label);
    let _ = writeln!(s, "ax.set_title({:?})", spec.title);
    let _ = writeln!(s, "ax.legend()");
    let _ = writeln!(s, "fig.tight_layout()");
    let _ = writeln!(s, "fig.savefig(path + \".png\")");
    let _ = writeln!(s, "plt.show()");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["n", "eta"]);
        t.meta("rate_convention", "angular").summary("slope", 4.33);
        t.push(vec![5.0, 0.15]);
        t.push(vec![100.0, f64::NAN]);
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# rate_convention = angular");
        assert_eq!(lines[1], "# slope = 4.33");
        assert_eq!(lines[2], "n,eta");
        assert_eq!(lines[3], "5e0,1.5e-1");
        assert_eq!(lines[4], "1e2,nan");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_mirrors_columns() {
        let v: Value = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(v["meta"]["rate_convention"], "angular");
        assert_eq!(v["columns"][1], "eta");
        assert_eq!(v["rows"][0][1], 0.15);
        assert!(v["rows"][1][1].is_null());
    }

    #[test]
    fn format_parses() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }

    #[test]
    fn plot_script_reads_csv() {
        let spec = PlotSpec {
            title: "t".into(),
            x: "n".into(),
            ys: vec!["eta".into()],
            x_label: "n".into(),
            y_label: "eta".into(),
            log_y: false,
            x_scale: 1.0,
        };
        let s = plot_script("out.csv", &spec);
        assert!(s.contains("path = \"out.csv\""));
        assert!(s.contains("data[col]"));
    }
}
