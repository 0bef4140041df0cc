//! Plain-text parameter snapshots.
//!
//! ```text
//! imle-params 1
//! <name> <rank> <dim>... 
//! <value> <value> ...        (row-major, one line per tensor)
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so reading a snapshot
//! back reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ParamTensor;

const MAGIC: &str = "imle-params 1";

pub fn to_string<'a>(tensors: impl IntoIterator<Item = &'a ParamTensor>) -> String {
    let mut out = String::from(MAGIC);
    out.push('\n');
    for t in tensors {
        let _ = write!(out, "{} {}", t.name, t.shape.len());
        for d in &t.shape {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        let values: Vec<String> = t.values.iter().map(|v| v.to_string()).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<ParamTensor>> {
    let bad = |msg: &str| Error::Config(format!("snapshot: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header"));
    }
    let mut out = Vec::new();
    while let Some(head) = lines.next() {
        if head.is_empty() {
            continue;
        }
        let mut parts = head.split_whitespace();
        let name = parts.next().ok_or_else(|| bad("missing name"))?;
        let rank: usize = parts.next().and_then(|r| r.parse().ok()).ok_or_else(|| bad("bad rank"))?;
        let shape = parts.map(|d| d.parse::<usize>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("bad shape"))?;
        if shape.len() != rank {
            return Err(bad("rank does not match shape"));
        }
        let values = lines
            .next()
            .ok_or_else(|| bad("missing values"))?
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad value"))?;
        out.push(ParamTensor::from_values(name, &shape, values)?);
    }
    Ok(out)
}

pub fn write<'a>(path: &Path, tensors: impl IntoIterator<Item = &'a ParamTensor>) -> Result<()> {
    std::fs::write(path, to_string(tensors))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<ParamTensor>> {
    parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let a = ParamTensor::from_values("w", &[2, 3], vec![0.1, -1e-300, 3.0, f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]).unwrap();
        let b = ParamTensor::from_values("b", &[1], vec![7.5]).unwrap();
        let back = parse(&to_string([&a, &b])).unwrap();
        assert_eq!(back.len(), 2);
        for (x, y) in [&a, &b].into_iter().zip(&back) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.shape, y.shape);
            let bits = |t: &ParamTensor| t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(x), bits(y));
        }
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(parse("nope").is_err());
        assert!(parse("imle-params 1\nw 2 2 2\n1 2 3\n").is_err());
        assert!(parse("imle-params 1\nw 1 2\n").is_err());
    }
}
