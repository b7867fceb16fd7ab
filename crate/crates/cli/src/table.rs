use std::io::Write;

use anyhow::Result;
use purify_core::rates::Capacity;
use serde::Serialize;

use crate::args::Format;

pub const RATE_COLUMNS: [&str; 8] = ["distance_km", "eta", "k", "m", "rate", "capacity", "ratio", "probability"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub distance_km: Option<f64>,
    pub eta: f64,
    pub k: Option<u32>,
    pub m: Option<u32>,
    pub rate: Option<f64>,
    #[serde(serialize_with = "capacity_json")]
    pub capacity: Capacity,
    pub ratio: Option<f64>,
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubit_rate: Option<f64>,
}

fn capacity_json<S: serde::Serializer>(c: &Capacity, s: S) -> std::result::Result<S::Ok, S::Error> {
    c.finite().serialize(s)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub qubit_column: bool,
}

impl RateTable {
    fn header(&self) -> Vec<&'static str> {
        let mut h = RATE_COLUMNS.to_vec();
        if self.qubit_column {
            h.push("qubit_rate");
        }
        h
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut rec = vec![
                    opt(r.distance_km),
                    num(r.eta),
                    r.k.map_or(String::new(), |k| k.to_string()),
                    r.m.map_or(String::new(), |m| m.to_string()),
                    opt(r.rate),
                    r.capacity.finite().map_or_else(|| "inf".to_string(), num),
                    opt(r.ratio),
                    opt(r.probability),
                ];
                if self.qubit_column {
                    rec.push(opt(r.qubit_rate));
                }
                rec
            })
            .collect()
    }

    pub fn write(&self, format: Format, out: impl Write) -> Result<()> {
        match format {
            Format::Csv => write_csv(&self.header(), &self.records(), out),
            Format::Json => write_json(&self.rows, out),
        }
    }
}

/// Shortest round-trip decimal form; deterministic across platforms.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

pub fn write_csv(header: &[&str], records: &[Vec<String>], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(rows: &[T], mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}
