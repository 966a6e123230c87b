//! CSV tables with a fixed header and floats printed at 17 significant digits.

use std::io::Write;
use std::path::Path;

use crate::Result;

/// Scientific notation with 17 significant digits, so values round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&'static str]) -> Self {
        CsvTable {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Order rows by their rendered fields, giving output independent of
    /// evaluation order.
    pub fn sort_rows_by(&mut self, key: impl Fn(&[String]) -> Vec<SortKey>) {
        self.rows.sort_by_cached_key(|r| key(r));
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// Sort key component: text compares lexicographically, numbers numerically.
#[derive(Clone, Debug)]
pub enum SortKey {
    Text(String),
    Num(f64),
}

impl PartialEq for SortKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for SortKey {}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (SortKey::Num(a), SortKey::Num(b)) => a.total_cmp(b),
            (SortKey::Text(a), SortKey::Text(b)) => a.cmp(b),
            (SortKey::Text(_), SortKey::Num(_)) => std::cmp::Ordering::Greater,
            (SortKey::Num(_), SortKey::Text(_)) => std::cmp::Ordering::Less,
        }
    }
}

/// Key that treats each field as a number when it parses as one.
pub fn natural_key(row: &[String]) -> Vec<SortKey> {
    row.iter()
        .map(|f| {
            f.parse::<f64>()
                .map(SortKey::Num)
                .unwrap_or_else(|_| SortKey::Text(f.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 4.0 / 9.0, 1e-300, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn sorting_is_numeric() {
        let mut t = CsvTable::new(&["name", "k"]);
        t.push(vec!["b".into(), "10".into()]);
        t.push(vec!["a".into(), "9".into()]);
        t.push(vec!["a".into(), "10".into()]);
        t.sort_rows_by(natural_key);
        let ks: Vec<&str> = t.rows.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(ks, ["9", "10", "10"]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(text, "name,k\na,9\na,10\nb,10\n");
    }
}
