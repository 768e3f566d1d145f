use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

/// N snapshot records (x0, x1, h) in `dim` dimensions, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    dim: usize,
    alpha: f64,
    x0: Vec<f64>,
    x1: Vec<f64>,
    h: Vec<f64>,
    /// Group start offsets followed by N; groups are contiguous record ranges.
    group_offsets: Option<Vec<usize>>,
    pub system: Option<String>,
    pub seed: Option<u64>,
}

/// Metadata written next to the CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub dim: usize,
    pub alpha: f64,
    pub system: Option<String>,
    pub seed: Option<u64>,
    pub records: usize,
    pub group_offsets: Option<Vec<usize>>,
}

impl SnapshotDataset {
    pub fn new(dim: usize, alpha: f64) -> Self {
        Self {
            dim,
            alpha,
            x0: Vec::new(),
            x1: Vec::new(),
            h: Vec::new(),
            group_offsets: None,
            system: None,
            seed: None,
        }
    }

    pub fn with_capacity(dim: usize, alpha: f64, n: usize) -> Self {
        let mut ds = Self::new(dim, alpha);
        ds.x0.reserve(n * dim);
        ds.x1.reserve(n * dim);
        ds.h.reserve(n);
        ds
    }

    pub fn push(&mut self, x0: &[f64], x1: &[f64], h: f64) -> Result<()> {
        for v in [x0, x1] {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        if !(h > 0.0) {
            return Err(Error::domain(format!("step h must be positive, got {h}")));
        }
        self.x0.extend_from_slice(x0);
        self.x1.extend_from_slice(x1);
        self.h.push(h);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn x0(&self, i: usize) -> &[f64] {
        &self.x0[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x1(&self, i: usize) -> &[f64] {
        &self.x1[i * self.dim..(i + 1) * self.dim]
    }

    pub fn h(&self, i: usize) -> f64 {
        self.h[i]
    }

    /// Installs a grouping given as start offsets plus the final length,
    /// checking that every group shares x0 and h.
    pub fn set_grouping(&mut self, offsets: Vec<usize>) -> Result<()> {
        let n = self.len();
        if offsets.first() != Some(&0) || offsets.last() != Some(&n) {
            return Err(Error::config(
                "group offsets must start at 0 and end at the record count",
            ));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("group offsets must be strictly increasing"));
        }
        for (g, w) in offsets.windows(2).enumerate() {
            let first = w[0];
            for i in w[0] + 1..w[1] {
                if self.x0(i) != self.x0(first) || self.h(i) != self.h(first) {
                    return Err(Error::config(format!(
                        "group {g} is not homogeneous in (x0, h) at record {i}"
                    )));
                }
            }
        }
        self.group_offsets = Some(offsets);
        Ok(())
    }

    pub fn clear_grouping(&mut self) {
        self.group_offsets = None;
    }

    pub fn group_offsets(&self) -> Option<&[usize]> {
        self.group_offsets.as_deref()
    }

    /// Record ranges of each group, or an error when no grouping is present.
    pub fn groups(&self) -> Result<Vec<Range<usize>>> {
        let off = self.group_offsets.as_ref().ok_or(Error::MissingGrouping)?;
        Ok(off.windows(2).map(|w| w[0]..w[1]).collect())
    }

    /// Groups consecutive records with identical (x0, h).
    pub fn infer_grouping(&mut self) {
        let n = self.len();
        let mut offsets = vec![0];
        for i in 1..n {
            if self.x0(i) != self.x0(i - 1) || self.h(i) != self.h(i - 1) {
                offsets.push(i);
            }
        }
        if n > 0 {
            offsets.push(n);
            self.group_offsets = Some(offsets);
        }
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            dim: self.dim,
            alpha: self.alpha,
            system: self.system.clone(),
            seed: self.seed,
            records: self.len(),
            group_offsets: self.group_offsets.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.len() * (2 * self.dim + 1) * 20);
        s.push('h');
        for k in 1..=self.dim {
            let _ = write!(s, ",x0_{k}");
        }
        for k in 1..=self.dim {
            let _ = write!(s, ",x1_{k}");
        }
        s.push('\n');
        for i in 0..self.len() {
            let _ = write!(s, "{:?}", self.h[i]);
            for v in self.x0(i).iter().chain(self.x1(i)) {
                let _ = write!(s, ",{v:?}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the CSV body; grouping and metadata come from the sidecar.
    pub fn from_csv(text: &str, alpha: f64) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.len() < 3 || cols.len().is_multiple_of(2) || cols[0] != "h" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `h,x0_1..x0_d,x1_1..x1_d`, got `{header}`"),
            });
        }
        let dim = (cols.len() - 1) / 2;
        for k in 0..dim {
            if cols[1 + k] != format!("x0_{}", k + 1) || cols[1 + dim + k] != format!("x1_{}", k + 1) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected column names in header `{header}`"),
                });
            }
        }
        let mut ds = Self::new(dim, alpha);
        let mut row = vec![0.0; 2 * dim + 1];
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0;
            for (j, field) in line.split(',').enumerate() {
                if j >= row.len() {
                    count = j + 1;
                    break;
                }
                row[j] = field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("column {}: {e} (`{field}`)", j + 1),
                })?;
                count = j + 1;
            }
            if count != row.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} fields", row.len()),
                });
            }
            ds.push(&row[1..1 + dim], &row[1 + dim..], row[0])
                .map_err(|e| Error::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
        }
        Ok(ds)
    }

    /// Path of the JSON sidecar belonging to a CSV path.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes `<path>` (CSV) and its `.json` sidecar atomically.
    pub fn write(&self, csv: &Path) -> Result<()> {
        write_atomic(csv, self.to_csv().as_bytes())?;
        let side = serde_json::to_string_pretty(&self.sidecar())?;
        write_atomic(&Self::sidecar_path(csv), side.as_bytes())
    }

    /// Reads a CSV and, when present, its sidecar. Without a sidecar α is NaN
    /// and groups are inferred from runs of identical (x0, h).
    pub fn read(csv: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
        let side_path = Self::sidecar_path(csv);
        let sidecar: Option<DatasetSidecar> = if side_path.exists() {
            let s = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
            Some(serde_json::from_str(&s)?)
        } else {
            None
        };
        let mut ds = Self::from_csv(&text, sidecar.as_ref().map_or(f64::NAN, |s| s.alpha))?;
        match sidecar {
            Some(side) => {
                if side.dim != ds.dim || side.records != ds.len() {
                    return Err(Error::config(format!(
                        "sidecar describes {} records of dim {}, CSV has {} of dim {}",
                        side.records,
                        side.dim,
                        ds.len(),
                        ds.dim
                    )));
                }
                ds.system = side.system;
                ds.seed = side.seed;
                if let Some(off) = side.group_offsets {
                    ds.set_grouping(off)?;
                }
            }
            None => ds.infer_grouping(),
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotDataset {
        let mut ds = SnapshotDataset::new(2, 1.5);
        ds.push(&[0.1, 0.2], &[1e-7, -3.5e21], 0.5).unwrap();
        ds.push(&[0.1, 0.2], &[0.3333333333333333, 2.0], 0.5).unwrap();
        ds.push(&[-1.0, 1.0], &[f64::MIN_POSITIVE, 7.25], 0.5).unwrap();
        ds.set_grouping(vec![0, 2, 3]).unwrap();
        ds
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = sample();
        let text = ds.to_csv();
        assert!(text.starts_with("h,x0_1,x0_2,x1_1,x1_2\n"));
        let back = SnapshotDataset::from_csv(&text, 1.5).unwrap();
        assert_eq!(back.to_csv(), text);
        for i in 0..3 {
            assert_eq!(back.x1(i), ds.x1(i));
        }
    }

    #[test]
    fn grouping_is_validated() {
        let mut ds = sample();
        assert!(ds.set_grouping(vec![0, 3]).is_err());
        assert!(ds.set_grouping(vec![0, 1, 3]).is_err());
        assert!(ds.set_grouping(vec![0, 1, 2, 3]).is_ok());
        ds.infer_grouping();
        assert_eq!(ds.group_offsets(), Some(&[0, 2, 3][..]));
        ds.clear_grouping();
        assert!(matches!(ds.groups(), Err(Error::MissingGrouping)));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "h,x0_1,x1_1\n0.1,0,1\n0.1,zero,1\n";
        match SnapshotDataset::from_csv(text, 1.5) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "h,x0_1,x1_1\n0.1,0\n";
        assert!(matches!(
            SnapshotDataset::from_csv(text, 1.5),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            SnapshotDataset::from_csv("a,b\n", 1.5),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_records() {
        let mut ds = SnapshotDataset::new(1, 1.5);
        assert!(ds.push(&[0.0], &[0.0], 0.0).is_err());
        assert!(ds.push(&[0.0, 1.0], &[0.0], 0.1).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut ds = sample();
        ds.system = Some("maier_stein".into());
        ds.seed = Some(9);
        ds.write(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = SnapshotDataset::read(&path).unwrap();
        assert_eq!(back, ds);
        back.write(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
