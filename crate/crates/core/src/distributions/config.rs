//! Plain-text joint model format: one marginal per line,
//! `kind, p1, p2, parameterization`. Blank lines and `#` comments are ignored.

use std::path::Path;

use super::{JointModel, Marginal};
use crate::{Error, Result};

pub fn parse_joint(text: &str, origin: &Path) -> Result<JointModel> {
    let mut marginals = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 comma-separated fields, found {}", fields.len())));
        }
        let kind = fields[0].parse().map_err(|e: Error| err(e.to_string()))?;
        let p1: f64 = fields[1].parse().map_err(|_| err(format!("bad number `{}`", fields[1])))?;
        let p2: f64 = fields[2].parse().map_err(|_| err(format!("bad number `{}`", fields[2])))?;
        let param = fields[3].parse().map_err(|e: Error| err(e.to_string()))?;
        marginals.push(Marginal::new(kind, p1, p2, param).map_err(|e| err(e.to_string()))?);
    }
    JointModel::new(marginals).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn write_joint(joint: &JointModel) -> String {
    let mut out = String::new();
    for m in joint.marginals() {
        let (p1, p2) = m.params();
        // `{:?}` on f64 prints the shortest representation that round-trips.
        out.push_str(&format!("{}, {:?}, {:?}, {}\n", m.kind(), p1, p2, m.parameterization()));
    }
    out
}
