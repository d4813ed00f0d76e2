//! CSV artifacts: header row, LF line endings, shortest round-trip floats.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::feasible::{BoundaryCurve, BoundaryPoint};
use crate::{Error, Result};

fn data_err(e: impl std::fmt::Display) -> Error {
    Error::Data(e.to_string())
}

/// Write rows with a header taken from the field names.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(data_err)?;
    }
    w.flush().map_err(data_err)
}

pub fn read_csv<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .from_reader(input)
        .deserialize()
        .map(|r| r.map_err(data_err))
        .collect()
}

pub fn write_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(data_err)
}

pub fn write_boundary<W: Write>(out: W, curve: &BoundaryCurve) -> Result<()> {
    write_csv(out, &curve.points)
}

pub fn read_boundary<R: Read>(input: R) -> Result<BoundaryCurve> {
    BoundaryCurve::from_points(read_csv::<BoundaryPoint, _>(input)?)
}

/// A named price pair, e.g. an equilibrium under some search algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub label: String,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub inside: bool,
}
