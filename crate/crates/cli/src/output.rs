use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::Format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column table written as CSV (with a `#` header) or as JSON.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Extra `# key: value` header lines.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row.into_iter().map(Some).collect());
    }

    fn to_csv(&self, config: &Value) -> String {
        let mut s = String::new();
        writeln!(s, "# telegraph {VERSION}").unwrap();
        writeln!(s, "# config: {config}").unwrap();
        for n in &self.notes {
            writeln!(s, "# {n}").unwrap();
        }
        writeln!(s, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }

    fn to_json(&self, config: &Value) -> Value {
        let cols: serde_json::Map<String, Value> = self
            .columns
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let col: Vec<Option<f64>> = self.rows.iter().map(|r| r[k]).collect();
                (name.to_string(), json!(col))
            })
            .collect();
        json!({ "version": VERSION, "config": config, "notes": self.notes, "columns": cols })
    }
}

pub struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    config: Value,
}

impl<'a> Writer<'a> {
    pub fn new<C: Serialize>(dir: &'a Path, format: Format, config: &C) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir,
            format,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn table(&self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            Format::Csv => fs::write(
                self.dir.join(format!("{stem}.csv")),
                table.to_csv(&self.config),
            )?,
            Format::Json => {
                let text = serde_json::to_string_pretty(&table.to_json(&self.config))?;
                fs::write(self.dir.join(format!("{stem}.json")), text + "\n")?
            }
        }
        Ok(())
    }

    /// Scalar summary, always JSON.
    pub fn summary<S: Serialize>(&self, stem: &str, body: &S) -> Result<()> {
        let doc = json!({ "version": VERSION, "config": self.config, "results": body });
        fs::write(
            self.dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&doc)? + "\n",
        )?;
        Ok(())
    }
}
