//! Deterministic `key = value` report files.
//!
//! Reals are written with 17 significant digits so values round-trip
//! exactly. Nothing time- or host-dependent goes into a report.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    text: String,
}

pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "[{name}]");
        self
    }

    pub fn real(&mut self, key: &str, v: f64) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {}", fmt_real(v));
        self
    }

    pub fn opt_real(&mut self, key: &str, v: Option<f64>) -> &mut Self {
        match v {
            Some(v) => self.real(key, v),
            None => self.text(key, "undefined"),
        }
    }

    pub fn int(&mut self, key: &str, v: impl Into<i128>) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {}", v.into());
        self
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {v}");
        self
    }

    pub fn text(&mut self, key: &str, v: &str) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {v:?}");
        self
    }

    pub fn reals(&mut self, key: &str, vs: &[f64]) -> &mut Self {
        let items: Vec<String> = vs.iter().map(|&v| fmt_real(v)).collect();
        let _ = writeln!(self.text, "{key} = [{}]", items.join(", "));
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut r = Report::new();
        r.section("a")
            .real("x", 0.1)
            .int("n", 3u32)
            .flag("ok", true)
            .text("s", "hi");
        r.section("b")
            .opt_real("y", None)
            .reals("v", &[1.0, f64::INFINITY]);
        let want = "[a]\nx = 1.0000000000000001e-1\nn = 3\nok = true\ns = \"hi\"\n\n[b]\ny = \"undefined\"\nv = [1.0000000000000000e0, inf]\n";
        assert_eq!(r.as_str(), want);
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
