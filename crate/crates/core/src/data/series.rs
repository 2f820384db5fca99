use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T` consecutive monthly amounts and the amount of month `T + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub values: Vec<f64>,
    pub target: f64,
    /// Ground-truth Laplace scale of synthetic data.
    pub true_scale: Option<f64>,
}

impl RawSeries {
    pub fn new(values: Vec<f64>, target: f64) -> Result<Self> {
        let s = Self {
            values,
            target,
            true_scale: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::Domain(format!(
                "a series needs at least 2 values, got {}",
                self.values.len()
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) || !self.target.is_finite() {
            return Err(Error::Domain("series contains non-finite values".into()));
        }
        if let Some(b) = self.true_scale {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Domain(format!("invalid true_scale {b}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Writes one series per row: `z1..zT,target[,true_scale]` with a header.
/// The `true_scale` column is present when any series carries one.
pub fn write_series_csv<W: Write>(writer: W, series: &[RawSeries]) -> Result<()> {
    let t = series.first().map_or(0, RawSeries::len);
    if series.iter().any(|s| s.len() != t) {
        return Err(Error::Shape("all series in a dataset must share one length".into()));
    }
    let with_scale = series.iter().any(|s| s.true_scale.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=t).map(|i| format!("z{i}")).collect();
    header.push("target".into());
    if with_scale {
        header.push("true_scale".into());
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(t + 2);
    for s in series {
        row.clear();
        row.extend(s.values.iter().map(|v| format!("{v}")));
        row.push(format!("{}", s.target));
        if with_scale {
            row.push(s.true_scale.map(|b| format!("{b}")).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<RawSeries>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let target_col = cols
        .iter()
        .position(|c| *c == "target")
        .ok_or_else(|| Error::Domain("dataset header lacks a `target` column".into()))?;
    let scale_col = cols.iter().position(|c| *c == "true_scale");
    if target_col < 2
        || cols[..target_col]
            .iter()
            .enumerate()
            .any(|(i, c)| *c != format!("z{}", i + 1))
    {
        return Err(Error::Domain("dataset header must start with z1..zT (T >= 2)".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Domain(format!("row {}: cannot parse `{s}`: {e}", line + 1)))
        };
        let values = rec.iter().take(target_col).map(parse).collect::<Result<Vec<_>>>()?;
        let target = parse(rec.get(target_col).unwrap_or(""))?;
        let true_scale = match scale_col.and_then(|c| rec.get(c)) {
            Some(s) if !s.trim().is_empty() => Some(parse(s)?),
            _ => None,
        };
        let s = RawSeries {
            values,
            target,
            true_scale,
        };
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

pub fn save_series_csv(path: &Path, series: &[RawSeries]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_series_csv(std::io::BufWriter::new(f), series)
}

pub fn load_series_csv(path: &Path) -> Result<Vec<RawSeries>> {
    let f = std::fs::File::open(path)?;
    read_series_csv(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = RawSeries {
            values: vec![1.0, 2.5, -3.0],
            target: 4.0,
            true_scale: Some(0.5),
        };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "z1,z2,z3,target,true_scale\n1,2.5,-3,4,0.5\n");
    }

    #[test]
    fn rejects_short_or_bad_rows() {
        assert!(RawSeries::new(vec![1.0], 2.0).is_err());
        assert!(RawSeries::new(vec![1.0, f64::NAN], 2.0).is_err());
        assert!(read_series_csv("z1,z2,target\n1,x,3\n".as_bytes()).is_err());
        assert!(read_series_csv("a,b,target\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn optional_scale_column() {
        let rows = read_series_csv("z1,z2,target\n1,2,3\n".as_bytes()).unwrap();
        assert_eq!(rows[0].true_scale, None);
        assert_eq!(rows[0].values, vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in proptest::collection::vec(
                (proptest::collection::vec(-1e6f64..1e6, 4), -1e6f64..1e6, 0.0f64..100.0), 1..10)
        ) {
            let series: Vec<RawSeries> = rows
                .into_iter()
                .map(|(values, target, b)| RawSeries { values, target, true_scale: Some(b) })
                .collect();
            let mut buf = Vec::new();
            write_series_csv(&mut buf, &series).unwrap();
            prop_assert_eq!(read_series_csv(buf.as_slice()).unwrap(), series);
        }
    }
}
