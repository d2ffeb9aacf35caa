//! Rendering of command reports as aligned text, CSV or JSON.

use clap::ValueEnum;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub fields: Vec<(String, Value)>,
    pub tables: Vec<Table>,
}

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

impl Report {
    pub fn new(command: &str, config_sha256: String, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_sha256,
            seed,
            fields: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn field(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.render_text(),
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn header(&self) -> String {
        format!(
            "# qfc {} config_sha256={} seed={}",
            self.command, self.config_sha256, self.seed
        )
    }

    fn render_text(&self) -> String {
        let mut out = vec![self.header()];
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.fields {
            out.push(format!("{k:<width$}  {}", cell(v)));
        }
        for t in &self.tables {
            out.push(String::new());
            out.push(format!("[{}]", t.name));
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| {
                    cells
                        .iter()
                        .map(|r| r.get(j).map_or(0, |c| c.len()))
                        .chain([t.columns[j].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |row: &[String]| {
                row.iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push(line(&t.columns));
            for r in &cells {
                out.push(line(r));
            }
        }
        out.join("\n") + "\n"
    }

    fn render_csv(&self) -> String {
        let mut out = vec![self.header()];
        if self.tables.is_empty() {
            out.push("quantity,value".into());
            for (k, v) in &self.fields {
                out.push(format!("{},{}", csv_escape(k), csv_escape(&cell(v))));
            }
        } else {
            for (k, v) in &self.fields {
                out.push(format!("# {k} = {}", cell(v)));
            }
            for (n, t) in self.tables.iter().enumerate() {
                if n > 0 {
                    out.push(String::new());
                }
                if self.tables.len() > 1 {
                    out.push(format!("# table {}", t.name));
                }
                out.push(t.columns.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(","));
                for r in &t.rows {
                    out.push(r.iter().map(|v| csv_escape(&cell(v))).collect::<Vec<_>>().join(","));
                }
            }
        }
        out.join("\n") + "\n"
    }

    fn render_json(&self) -> String {
        let fields: serde_json::Map<String, Value> = self.fields.iter().cloned().collect();
        let doc = json!({
            "command": self.command,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "fields": fields,
            "tables": self.tables,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }
}

/// Floats in `{:.8e}`, complex pairs as `re+imi`.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.8e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::Null => "nan".into(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number) => {
            let re = a[0].as_f64().unwrap_or(f64::NAN);
            let im = a[1].as_f64().unwrap_or(f64::NAN);
            format!("{re:.8e}{}{:.8e}i", if im < 0.0 { "-" } else { "+" }, im.abs())
        }
        other => other.to_string(),
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        let mut r = Report::new("analyze", "abc".into(), 7);
        r.field("n_eff", 0.25).field("label", "x, y").field("pole", complex(Complex64::new(1.0, -2.0)));
        r
    }

    #[test]
    fn csv_header_and_number_format() {
        let s = report().render(Format::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# qfc analyze config_sha256=abc seed=7");
        assert_eq!(lines[2], "n_eff,2.50000000e-1");
        assert_eq!(lines[3], "label,\"x, y\"");
        assert_eq!(lines[4], "pole,1.00000000e0-2.00000000e0i");
    }

    #[test]
    fn json_round_trips() {
        let v: Value = serde_json::from_str(&report().render(Format::Json)).unwrap();
        assert_eq!(v["fields"]["n_eff"], 0.25);
        assert_eq!(v["seed"], 7);
    }

    #[test]
    fn nan_renders() {
        assert_eq!(cell(&json!(f64::NAN)), "nan");
    }
}
