//! Long-format dataset CSV: one row per present (sample, view).
//!
//! Header is `view,sample,label,f0,...,f{d-1}` with `d` the widest view;
//! narrower views leave trailing feature cells empty. A missing view has no row.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use kphd_core::model::{FeatureMatrix, MultiViewBatch};

use crate::error::{HarnessError, Result};

pub fn write_dataset<W: Write>(batch: &MultiViewBatch, w: W) -> Result<()> {
    let width = batch.view_dims().into_iter().max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["view".to_string(), "sample".into(), "label".into()];
    header.extend((0..width).map(|j| format!("f{j}")));
    out.write_record(&header)?;
    for i in 0..batch.len() {
        for m in 0..batch.view_count() {
            if !batch.is_present(i, m) {
                continue;
            }
            let mut record = vec![m.to_string(), i.to_string(), batch.labels()[i].to_string()];
            let row = batch.view(m).row(i);
            // `{:?}` prints the shortest string that parses back to the same f64.
            record.extend(row.iter().map(|x| format!("{x:?}")));
            record.resize(3 + width, String::new());
            out.write_record(&record)?;
        }
    }
    out.flush().map_err(|e| HarnessError::io("dataset", e))?;
    Ok(())
}

/// `classes` defaults to one more than the largest label seen.
pub fn read_dataset<R: Read>(r: R, classes: Option<usize>) -> Result<MultiViewBatch> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "view" || &header[1] != "sample" || &header[2] != "label" {
        return Err(HarnessError::Dataset {
            line: 1,
            message: "header must start with view,sample,label".into(),
        });
    }
    // (sample, view) -> features, sample -> label, view -> dim
    let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut labels: BTreeMap<usize, usize> = BTreeMap::new();
    let mut dims: BTreeMap<usize, usize> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| HarnessError::Dataset { line, message };
        let field = |j: usize, name: &str| -> Result<usize> {
            record
                .get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("`{name}` is not a non-negative integer")))
        };
        let (m, i, y) = (field(0, "view")?, field(1, "sample")?, field(2, "label")?);
        let features = record
            .iter()
            .skip(3)
            .take_while(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("feature `{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if features.is_empty() {
            return Err(bad("row has no features".into()));
        }
        if *dims.entry(m).or_insert(features.len()) != features.len() {
            return Err(bad(format!("view {m} rows disagree on feature count")));
        }
        if *labels.entry(i).or_insert(y) != y {
            return Err(bad(format!("sample {i} has conflicting labels")));
        }
        if cells.insert((i, m), features).is_some() {
            return Err(bad(format!("duplicate row for sample {i}, view {m}")));
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(HarnessError::Dataset {
            line: 1,
            message: "no rows".into(),
        });
    }
    if labels.keys().copied().ne(0..n) {
        return Err(HarnessError::Dataset {
            line: 0,
            message: "sample ids must be 0..n without gaps".into(),
        });
    }
    let views = dims.keys().max().map_or(0, |m| m + 1);
    if dims.len() != views {
        return Err(HarnessError::Dataset {
            line: 0,
            message: "view ids must be 0..M without gaps".into(),
        });
    }
    let classes = classes.unwrap_or_else(|| labels.values().max().map_or(0, |y| y + 1).max(2));
    let mut mats: Vec<FeatureMatrix> = (0..views).map(|m| FeatureMatrix::zeros(n, dims[&m])).collect();
    let mut present = vec![false; n * views];
    for ((i, m), f) in cells {
        mats[m].row_mut(i).copy_from_slice(&f);
        present[i * views + m] = true;
    }
    Ok(MultiViewBatch::new(classes, mats, labels.into_values().collect(), present)?)
}
