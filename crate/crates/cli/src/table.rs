//! Rectangular numeric result tables with a metadata header.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Missing cells (`None`) mark sweep points where no design exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>, config: &ExperimentConfig) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("experiment".into(), config.experiment.name().into());
        metadata.insert("config_hash".into(), config.hash());
        metadata.insert("seed".into(), config.seed.to_string());
        metadata.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
        Self {
            metadata,
            columns,
            rows: vec![],
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn gaps(&self) -> usize {
        self.rows.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default()),
            )
            .map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Parses the CSV form back, metadata included.
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut metadata = BTreeMap::new();
        let mut body = String::new();
        for line in text.lines() {
            match line.strip_prefix("# ") {
                Some(meta) => {
                    let (k, v) = meta
                        .split_once(": ")
                        .ok_or_else(|| CliError::Config(format!("bad metadata line {line}")))?;
                    metadata.insert(k.to_string(), v.to_string());
                }
                None => {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = vec![];
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse().map(Some)
                    }
                })
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("bad number: {e}")))?;
            rows.push(row);
        }
        Ok(Self {
            metadata,
            columns,
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
