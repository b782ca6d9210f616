//! CSV datasets, standardization and random train/test splits.
//!
//! A dataset file has a header row and a label column named `y` holding
//! either `-1`/`+1` or `0`/`1` (0 maps to -1). Every other column is a
//! numeric feature.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledDataset;

pub const LABEL_COLUMN: &str = "y";

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let ds = read_csv(File::open(path)?)?;
    log::info!("loaded {}: {} rows, {} features", path.display(), ds.n(), ds.d());
    Ok(ds)
}

#[derive(Clone, Copy, PartialEq)]
enum Alphabet {
    PlusMinus,
    ZeroOne,
}

/// Parsed CSV contents before a label column is required.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    /// Row-major, `feature_names.len()` values per row.
    pub features: Vec<f64>,
    /// Mapped to -1/+1; `None` when the file has no `y` column.
    pub labels: Option<Vec<f64>>,
}

impl Table {
    pub fn n(&self) -> usize {
        self.features.len() / self.feature_names.len()
    }

    /// Attaches the labels, failing when the file had none.
    pub fn into_dataset(self) -> Result<LabeledDataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::InvalidDataset(format!("no label column named {LABEL_COLUMN:?}")))?;
        let d = self.feature_names.len();
        LabeledDataset::new(self.features, labels, d)?.with_feature_names(self.feature_names)
    }

    /// The rows with placeholder `+1` labels when the file has none.
    pub fn into_features(self) -> Result<LabeledDataset> {
        let n = self.n();
        let d = self.feature_names.len();
        let labels = self.labels.unwrap_or_else(|| vec![1.0; n]);
        LabeledDataset::new(self.features, labels, d)?.with_feature_names(self.feature_names)
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<LabeledDataset> {
    read_table(reader)?.into_dataset()
}

pub fn load_table(path: impl AsRef<Path>) -> Result<Table> {
    read_table(File::open(path)?)
}

/// Reads a CSV whose label column may be absent.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_col = headers.iter().position(|h| h == LABEL_COLUMN);
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut alphabet: Option<Alphabet> = None;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[j].to_string(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[j].to_string(),
                    message: "non-finite value".into(),
                });
            }
            if Some(j) != label_col {
                features.push(value);
                continue;
            }
            let (seen, label) = match value {
                1.0 => (None, 1.0),
                -1.0 => (Some(Alphabet::PlusMinus), -1.0),
                0.0 => (Some(Alphabet::ZeroOne), -1.0),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: LABEL_COLUMN.into(),
                        message: format!("label {cell:?} is not one of -1, 0, 1"),
                    })
                }
            };
            if let Some(s) = seen {
                match alphabet {
                    Some(a) if a != s => {
                        return Err(Error::InvalidDataset(format!(
                            "row {row}: labels mix the -1/+1 and 0/1 codings"
                        )))
                    }
                    _ => alphabet = Some(s),
                }
            }
            labels.push(label);
        }
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Table {
        feature_names: names,
        features,
        labels: label_col.map(|_| labels),
    })
}

/// Writes `y` followed by the feature columns.
pub fn write_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path)?);
    write_csv_to(data, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![LABEL_COLUMN.to_string()];
    header.extend(data.feature_names().iter().cloned());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(data.d() + 1);
    for (x, y) in data.rows().zip(data.labels()) {
        record.clear();
        record.push(format!("{y}"));
        record.extend(x.iter().map(|v| format!("{v}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature centering and scaling learned from training rows.
///
/// The scale is the sample standard deviation (divisor `n - 1`). Features
/// that are constant on the training rows are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationStats {
    pub fn fit(train: &LabeledDataset) -> Self {
        let (n, d) = (train.n(), train.d());
        let mut mean = vec![0.0; d];
        for x in train.rows() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; d];
        for x in train.rows() {
            for ((s, v), m) in ss.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = vec![false; d];
        let sd = ss
            .iter()
            .zip(constant.iter_mut())
            .map(|(&s, c)| {
                let sd = if n > 1 { (s / (n - 1) as f64).sqrt() } else { 0.0 };
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    *c = true;
                    1.0
                }
            })
            .collect();
        Self { mean, sd, constant }
    }

    pub fn apply(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        data.check_dim(self.mean.len())?;
        let d = data.d();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let j = k % d;
                (v - self.mean[j]) / self.sd[j]
            })
            .collect();
        data.with_features(features)
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Standardizes `apply_to` with statistics computed on `train`.
pub fn standardize(
    train: &LabeledDataset,
    apply_to: &LabeledDataset,
) -> Result<(LabeledDataset, StandardizationStats)> {
    let stats = StandardizationStats::fit(train);
    Ok((stats.apply(apply_to)?, stats))
}

/// Sorted row indices of a random partition with `round(fraction * n)`
/// training rows.
pub fn split_indices<R: Rng + ?Sized>(
    n: usize,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let k = (train_fraction * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "split of {n} rows at {train_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut train = order[..k].to_vec();
    let mut test = order[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split<R: Rng + ?Sized>(
    data: &LabeledDataset,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(data.n(), train_fraction, rng)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_one_labels_are_mapped() {
        let csv = "x1,y,x2\n1,0,2\n3,1,4\n5,0,6\n";
        let ds = read_csv(csv.as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0, -1.0]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.feature_names(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let mut csv = String::from("y");
        for j in 1..=20 {
            csv.push_str(&format!(",g{j}"));
        }
        csv.push('\n');
        for row in 1..=3 {
            csv.push('1');
            for j in 1..=20 {
                if row == 2 && j == 17 {
                    csv.push_str(",abc");
                } else {
                    csv.push_str(",0.5");
                }
            }
            csv.push('\n');
        }
        match read_csv(csv.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "g17")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_column() {
        let t = read_table("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(t.labels, None);
        assert_eq!(t.n(), 2);
        assert!(t.clone().into_dataset().is_err());
        assert_eq!(t.into_features().unwrap().row(1), &[3.0, 4.0]);
        assert!(matches!(read_csv("y,x\n".as_bytes()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn label_errors() {
        assert!(read_csv("x1,x2\n1,2\n".as_bytes()).is_err());
        assert!(read_csv("y,x\n-1,2\n0,3\n".as_bytes()).is_err());
        assert!(read_csv("y,x\n2,2\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = LabeledDataset::from_rows(
            &[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 1e300]],
            vec![1.0, -1.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn standardization_by_hand() {
        let ds = LabeledDataset::from_rows(&[vec![1.0], vec![3.0]], vec![1.0, -1.0]).unwrap();
        let (z, stats) = standardize(&ds, &ds).unwrap();
        assert_eq!(stats.mean, vec![2.0]);
        assert!((stats.sd[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(z.features().iter().sum::<f64>(), 0.0);
        let at_mean = LabeledDataset::from_rows(&[vec![2.0]], vec![1.0]).unwrap();
        assert_eq!(stats.apply(&at_mean).unwrap().features(), &[0.0]);
    }

    #[test]
    fn constant_feature_is_centered_only() {
        let ds = LabeledDataset::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0]], vec![1.0, -1.0])
            .unwrap();
        let (z, stats) = standardize(&ds, &ds).unwrap();
        assert_eq!(stats.constant, vec![true, false]);
        assert_eq!(z.row(0)[0], 0.0);
    }

    #[test]
    fn split_sizes() {
        let rows: Vec<Vec<f64>> = (0..102).map(|i| vec![i as f64]).collect();
        let ds = LabeledDataset::from_rows(&rows, vec![1.0; 102]).unwrap();
        let (tr, te) = split(&ds, 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((tr.n(), te.n()), (71, 31));

        let (a, b) = split_indices(10, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(
            split_indices(10, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap(),
            (a, b)
        );
        assert!(split_indices(3, 0.1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(split_indices(3, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
