//! Text formatting helpers shared by every file format the crate writes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CtxError, Result};

/// 17 significant decimal digits; round-trips every f64 exactly.
pub fn fmt_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // Keep integral values readable.
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CtxError::Parse(format!("bad float: {s:?}")))
}

pub fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| CtxError::Parse(format!("bad integer: {s:?}")))
}

pub fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| CtxError::Parse(format!("bad integer: {s:?}")))
}

/// Read a flat `key=value` file; `#` starts a comment, blank lines are
/// skipped.
pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_kv(&text)
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CtxError::Parse(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn write_kv(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_is_exact() {
        for &v in &[0.1, 1.0 / 3.0, 0.8, -2.5e-8, 123456.789, 0.0, 1e300] {
            let s = fmt_float(v);
            assert_eq!(parse_float(&s).unwrap(), v, "{s}");
        }
    }

    #[test]
    fn kv_parse_and_errors() {
        let map = parse_kv("# comment\na=1\n b = two \n").unwrap();
        assert_eq!(map["a"], "1");
        assert_eq!(map["b"], "two");
        assert!(parse_kv("no equals sign").is_err());
    }
}
