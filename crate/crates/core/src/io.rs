//! Cell-share CSV files and the bundled datasets.
//!
//! Files carry one row per `(market, version)` under the exact header
//! `market_id,kind,version,price,share,count`; `count` may be blank.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::demand::{PriceVector, ShareVector, Version};
use crate::error::{Error, Result};
use crate::estimator::MarketObservation;
use crate::experiment::{CellKind, TreatmentCell};

pub const CSV_HEADER: [&str; 6] = ["market_id", "kind", "version", "price", "share", "count"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Control,
    Partial,
    Total,
}

impl From<&CellKind> for RowKind {
    fn from(kind: &CellKind) -> Self {
        match kind {
            CellKind::Control => RowKind::Control,
            CellKind::Partial { .. } => RowKind::Partial,
            CellKind::Total { .. } => RowKind::Total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub market_id: String,
    pub kind: RowKind,
    pub version: u8,
    pub price: f64,
    pub share: f64,
    pub count: Option<u64>,
}

/// Parses a cell-share CSV. Errors carry the 1-based line number.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(parse_error(1, e.to_string())),
        None => return Err(parse_error(1, "empty file".to_string())),
    };
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_error(1, format!("expected header '{}'", CSV_HEADER.join(","))));
    }
    let header = csv::StringRecord::from(CSV_HEADER.to_vec());
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row: CsvRow = rec.deserialize(Some(&header)).map_err(|e| parse_error(line, e.to_string()))?;
        Version::from_label(row.version).map_err(|e| parse_error(line, e.to_string()))?;
        if !row.price.is_finite() {
            return Err(parse_error(line, format!("price {} is not finite", row.price)));
        }
        if !(0.0..=1.0).contains(&row.share) {
            return Err(parse_error(line, format!("share {} outside [0, 1]", row.share)));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_error(line: u64, message: String) -> Error {
    Error::Parse { line: line as usize, message }
}

pub fn read_rows_from_str(text: &str) -> Result<Vec<CsvRow>> {
    read_rows(text.as_bytes())
}

pub fn write_rows<W: Write>(writer: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_io)?;
    for r in rows {
        let count = r.count.map(|c| c.to_string()).unwrap_or_default();
        let kind = match r.kind {
            RowKind::Control => "control",
            RowKind::Partial => "partial",
            RowKind::Total => "total",
        };
        w.write_record([
            r.market_id.as_str(),
            kind,
            &r.version.to_string(),
            &r.price.to_string(),
            &r.share.to_string(),
            &count,
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("{other:?}")),
    }
}

pub fn observations(rows: &[CsvRow]) -> Result<Vec<MarketObservation>> {
    rows.iter()
        .map(|r| {
            Ok(MarketObservation {
                market_id: r.market_id.clone(),
                version: Version::from_label(r.version)?,
                price: r.price,
                share: r.share,
                count: r.count,
            })
        })
        .collect()
}

/// One row pair per cell, market ids taken from `ids`.
pub fn rows_from_cells(cells: &[TreatmentCell], ids: &[String]) -> Vec<CsvRow> {
    cells
        .iter()
        .zip(ids)
        .flat_map(|(c, id)| {
            Version::BOTH.map(|k| CsvRow {
                market_id: id.clone(),
                kind: RowKind::from(&c.kind),
                version: k.label(),
                price: c.prices.get(k),
                share: c.shares.get(k),
                count: c.count,
            })
        })
        .collect()
}

struct Grouped {
    id: String,
    kind: RowKind,
    prices: [f64; 2],
    shares: [f64; 2],
    count: Option<u64>,
}

fn group(rows: &[CsvRow]) -> Result<Vec<Grouped>> {
    let mut out: Vec<(Grouped, [bool; 2])> = Vec::new();
    for r in rows {
        let k = Version::from_label(r.version)?.index();
        let pos = match out.iter().position(|(g, _)| g.id == r.market_id) {
            Some(p) => p,
            None => {
                out.push((
                    Grouped { id: r.market_id.clone(), kind: r.kind, prices: [0.0; 2], shares: [0.0; 2], count: r.count },
                    [false; 2],
                ));
                out.len() - 1
            }
        };
        let (g, seen) = &mut out[pos];
        if g.kind != r.kind || g.count != r.count {
            return Err(Error::invalid(format!("market {}: kind or count differs across its rows", g.id)));
        }
        if seen[k] {
            return Err(Error::invalid(format!("market {}: duplicate row for version {}", g.id, r.version)));
        }
        seen[k] = true;
        g.prices[k] = r.price;
        g.shares[k] = r.share;
    }
    out.into_iter()
        .map(|(g, seen)| {
            if seen != [true, true] {
                return Err(Error::invalid(format!("market {} lacks one of the two versions", g.id)));
            }
            Ok(g)
        })
        .collect()
}

/// Treatment cells with their market ids. Partial targets and discount
/// fractions are recovered from the prices relative to the control market.
pub fn cells(rows: &[CsvRow]) -> Result<(Vec<String>, Vec<TreatmentCell>)> {
    let groups = group(rows)?;
    let controls: Vec<&Grouped> = groups.iter().filter(|g| g.kind == RowKind::Control).collect();
    let [control] = controls.as_slice() else {
        return Err(Error::invalid(format!("expected exactly one control market, found {}", controls.len())));
    };
    let cp = control.prices;
    let mut ids = Vec::new();
    let mut out = Vec::new();
    for g in &groups {
        let kind = match g.kind {
            RowKind::Control => CellKind::Control,
            RowKind::Partial => {
                let changed: Vec<usize> = (0..2).filter(|&k| g.prices[k] != cp[k]).collect();
                let [k] = changed.as_slice() else {
                    return Err(Error::InvalidPairing(format!(
                        "partial market {} must differ from control in exactly one price",
                        g.id
                    )));
                };
                let target = if *k == 0 { Version::One } else { Version::Two };
                CellKind::Partial { target, discount: 1.0 - g.prices[*k] / cp[*k] }
            }
            RowKind::Total => {
                let (c1, c2) = (cp[0] - g.prices[0], cp[1] - g.prices[1]);
                if (c1 - c2).abs() > 1e-9 * cp[0].abs().max(cp[1].abs()).max(1.0) {
                    return Err(Error::InvalidPairing(format!(
                        "total market {} must cut both prices by the same amount",
                        g.id
                    )));
                }
                CellKind::Total { discount: c1 / cp[0].min(cp[1]) }
            }
        };
        let shares = ShareVector::from_inside(g.shares[0], g.shares[1])?;
        let cell = TreatmentCell::new(kind, PriceVector::new(g.prices[0], g.prices[1]), shares, g.count)
            .map_err(|e| Error::invalid(format!("market {}: {e}", g.id)))?;
        ids.push(g.id.clone());
        out.push(cell);
    }
    Ok((ids, out))
}

/// A dataset shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub name: &'static str,
    pub csv: &'static str,
    /// Assumptions behind the transcription, printed with every report.
    pub note: &'static str,
}

impl Dataset {
    pub fn rows(&self) -> Result<Vec<CsvRow>> {
        read_rows_from_str(self.csv)
    }
}

pub const AIRLINE: Dataset = Dataset {
    name: "airline",
    csv: include_str!("../data/airline.csv"),
    note: "field experiment, seat selection before (1) and after (2) a booking deadline; prices are not \
           published and are assumed to be 100 in the control group with 30% and 60% absolute discounts: \
           (100,100), (70,100), (40,100), (70,70), (40,40)",
};

pub const SCENARIO1: Dataset = Dataset {
    name: "scenario1",
    csv: include_str!("../data/scenario1.csv"),
    note: "synthetic market with a positive baseline-differentiation covariance; prices (100,100), (70,100), (70,70)",
};

pub const SCENARIO2: Dataset = Dataset {
    name: "scenario2",
    csv: include_str!("../data/scenario2.csv"),
    note: "synthetic market with a negative baseline-differentiation covariance; prices (100,100), (70,100), (70,70)",
};

pub const DATASETS: [Dataset; 3] = [AIRLINE, SCENARIO1, SCENARIO2];

pub fn dataset(name: &str) -> Result<Dataset> {
    DATASETS
        .iter()
        .find(|d| d.name == name)
        .copied()
        .ok_or_else(|| Error::invalid(format!("unknown dataset '{name}' (expected airline, scenario1 or scenario2)")))
}
