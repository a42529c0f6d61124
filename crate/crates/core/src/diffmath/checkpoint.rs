//! Text checkpoint format.
//!
//! ```text
//! params <count>
//! <name> <rows> <cols>
//! <row 0 values ...>
//! ...
//! ```
//!
//! Values are written with 17 significant digits so a write/read cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub fn encode(named: &[(String, &Tensor)]) -> String {
    let mut out = format!("params {}\n", named.len());
    for (name, t) in named {
        let _ = writeln!(out, "{name} {} {}", t.rows(), t.cols());
        for r in 0..t.rows() {
            let line: Vec<String> = t.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn decode(text: &str, origin: &str) -> Result<Vec<(String, Tensor)>> {
    let err = |line: usize, reason: String| Error::Parse {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty checkpoint".into()))?;
    let count: usize = header
        .strip_prefix("params ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| err(ln, format!("expected `params <count>`, got `{header}`")))?;

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, head) = lines
            .next()
            .ok_or_else(|| err(ln, "unexpected end of checkpoint".into()))?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let [name, rows, cols] = parts[..] else {
            return Err(err(ln, format!("expected `name rows cols`, got `{head}`")));
        };
        let rows: usize = rows.parse().map_err(|_| err(ln, "bad row count".into()))?;
        let cols: usize = cols.parse().map_err(|_| err(ln, "bad column count".into()))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| err(ln, format!("missing rows for `{name}`")))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| err(ln, format!("bad value `{tok}`")))?);
            }
            if data.len() - before != cols {
                return Err(err(ln, format!("expected {cols} values")));
            }
        }
        let t = Tensor::from_vec(rows, cols, data).map_err(|e| err(ln, e.to_string()))?;
        out.push((name.to_string(), t));
    }
    Ok(out)
}

pub fn save(path: &Path, named: &[(String, &Tensor)]) -> Result<()> {
    std::fs::write(path, encode(named)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text, &path.display().to_string())
}
