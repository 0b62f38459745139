//! JSON system files.
//!
//! ```json
//! { "A": [[..], ..], "B": [[..], ..], "state_owner": [..], "input_owner": [..], "meta": {..} }
//! ```
//!
//! `A` and `B` are dense and row-major; owners are 0-based subsystem ids.
//! `meta` is free-form and optional.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LtiNetworkSystem, SubsystemPartition};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub state_owner: Vec<usize>,
    pub input_owner: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], cols_if_empty: usize, what: &str) -> Result<Matrix> {
    let cols = rows.first().map_or(cols_if_empty, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Dimension(format!("{what} row {i} has {} entries, expected {cols}", r.len())));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl SystemFile {
    pub fn from_system(sys: &LtiNetworkSystem, meta: Option<serde_json::Value>) -> Self {
        SystemFile {
            a: rows_of(sys.a()),
            b: rows_of(sys.b()),
            state_owner: sys.partition().state_owner().to_vec(),
            input_owner: sys.partition().input_owner().to_vec(),
            meta,
        }
    }

    pub fn to_system(&self) -> Result<LtiNetworkSystem> {
        let a = from_rows(&self.a, 0, "A")?;
        let b = from_rows(&self.b, self.input_owner.len(), "B")?;
        let partition = SubsystemPartition::new(self.state_owner.clone(), self.input_owner.clone())?;
        LtiNetworkSystem::new(a, b, partition)
    }
}

pub fn read_system(path: &Path) -> Result<(LtiNetworkSystem, Option<serde_json::Value>)> {
    let file: SystemFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok((file.to_system()?, file.meta))
}

pub fn write_system(path: &Path, sys: &LtiNetworkSystem, meta: Option<serde_json::Value>) -> Result<()> {
    let text = serde_json::to_string_pretty(&SystemFile::from_system(sys, meta))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
