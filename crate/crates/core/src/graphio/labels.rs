// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, Target};

/// Post-synthesis labels; the log fields are derived on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRecord {
    pub design_id: String,
    pub raw_area: f64,
    pub raw_delay: f64,
    pub log_area: f64,
    pub log_delay: f64,
}

impl LabelRecord {
    pub fn new(design_id: impl Into<String>, raw_area: f64, raw_delay: f64) -> Result<Self, DataError> {
        let design_id = design_id.into();
        for (name, v) in [("area", raw_area), ("delay", raw_delay)] {
            if !v.is_finite() {
                return Err(DataError::NonFinite(format!("{name} of {design_id:?}")));
            }
            if v <= 0.0 {
                return Err(DataError::Domain {
                    id: design_id,
                    message: format!("{name} must be positive, got {v}"),
                });
            }
        }
        Ok(Self {
            design_id,
            raw_area,
            raw_delay,
            log_area: raw_area.ln(),
            log_delay: raw_delay.ln(),
        })
    }

    pub fn log_value(&self, target: Target) -> f64 {
        match target {
            Target::Area => self.log_area,
            Target::Delay => self.log_delay,
        }
    }
}

/// Parses a labels CSV. Columns are located by header name, so any column
/// order (and extra columns) is accepted.
pub fn read_labels<R: Read>(reader: R) -> Result<BTreeMap<String, LabelRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DataError::Schema {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (c_id, c_area, c_delay) = (col("design_id")?, col("area")?, col("delay")?);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| {
            field(c).parse::<f64>().map_err(|e| DataError::Parse {
                line,
                message: format!("{:?}: {e}", field(c)),
            })
        };
        let id = field(c_id).to_string();
        let label = LabelRecord::new(id.clone(), num(c_area)?, num(c_delay)?)?;
        if out.insert(id.clone(), label).is_some() {
            return Err(DataError::DuplicateKey(id));
        }
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<BTreeMap<String, LabelRecord>, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_labels(f)
}

pub fn write_labels<'a, W, I>(w: W, labels: I) -> Result<(), DataError>
where
    W: Write,
    I: IntoIterator<Item = &'a LabelRecord>,
{
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| DataError::Invalid(e.to_string());
    wtr.write_record(["design_id", "area", "delay"]).map_err(err)?;
    for l in labels {
        wtr.write_record([
            l.design_id.clone(),
            format!("{:?}", l.raw_area),
            format!("{:?}", l.raw_delay),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| DataError::Invalid(e.to_string()))
}

pub fn save_labels<'a, I>(path: &Path, labels: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = &'a LabelRecord>,
{
    let f = File::create(path).map_err(|e| DataError::io(path, e))?;
    write_labels(f, labels)
}
