//! Binary-classification datasets: CSV loading and a synthetic generator.
//!
//! The expected CSV layout is one header row, then one row per sample with
//! numeric feature columns and a final 0/1 label column. A snapshot of the
//! classic 30-feature diagnostic breast-cancer training split (455 rows)
//! ships in the crate's `data/` directory; `BILEVEL_DATA_DIR` overrides the
//! lookup location at runtime.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProblemError;

/// Feature matrix plus 0/1 labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `n × p` feature matrix.
    pub features: Array2<f64>,
    /// Length-`n` labels, each exactly 0.0 or 1.0.
    pub labels: Array1<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// The first `n` rows as a new dataset (deterministic split).
    pub fn head(&self, n: usize) -> Result<Dataset, ProblemError> {
        if n > self.n_samples() {
            return Err(ProblemError::DatasetTooSmall { needed: n, got: self.n_samples() });
        }
        Ok(Dataset {
            features: self.features.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels.slice(ndarray::s![..n]).to_owned(),
            feature_names: self.feature_names.clone(),
        })
    }
}

/// Directory holding bundled data files: `BILEVEL_DATA_DIR` if set, else the
/// crate's `data/` directory (baked in at compile time, valid for in-repo use).
pub fn data_dir() -> PathBuf {
    match std::env::var_os("BILEVEL_DATA_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")),
    }
}

/// Path of the bundled 455-row training snapshot.
pub fn bundled_train_path() -> PathBuf {
    data_dir().join("breast_cancer_train.csv")
}

/// Load a header+rows CSV whose final column is a 0/1 label.
///
/// Parse failures report 1-based line numbers; a label that is neither 0 nor 1
/// is rejected rather than rounded.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset, ProblemError> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(ProblemError::Parse { line: 1, msg: "empty file".into() }),
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 {
        return Err(ProblemError::Parse {
            line: 1,
            msg: format!("need at least two columns, got {}", cols.len()),
        });
    }
    let p = cols.len() - 1;
    let feature_names: Vec<String> = cols[..p].iter().map(|s| s.trim().to_string()).collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2; // 1-based, after the header
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(ProblemError::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", p + 1, fields.len()),
            });
        }
        for f in &fields[..p] {
            let v: f64 = f.trim().parse().map_err(|e| ProblemError::Parse {
                line: lineno,
                msg: format!("bad number {f:?}: {e}"),
            })?;
            rows.push(v);
        }
        let lab: f64 = fields[p].trim().parse().map_err(|e| ProblemError::Parse {
            line: lineno,
            msg: format!("bad label {:?}: {e}", fields[p]),
        })?;
        if lab != 0.0 && lab != 1.0 {
            return Err(ProblemError::NonBinaryLabel { line: lineno });
        }
        labels.push(lab);
    }
    let n = labels.len();
    if n == 0 {
        return Err(ProblemError::Parse { line: 2, msg: "no data rows".into() });
    }
    let features = Array2::from_shape_vec((n, p), rows)
        .expect("row collection length is n*p by construction");
    Ok(Dataset { features, labels: Array1::from(labels), feature_names })
}

/// Deterministic synthetic fallback: standard normal features and labels from
/// a random linear rule with logistic noise.
pub fn make_synthetic_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = {
        let mut r = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        move || {
            let u1: f64 = r.gen_range(f64::EPSILON..1.0);
            let u2: f64 = r.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    };
    let features = Array2::from_shape_fn((n, p), |_| normal());
    let w = Array1::from_shape_fn(p, |_| normal());
    let labels = Array1::from_shape_fn(n, |i| {
        let t: f64 = features.row(i).dot(&w) / (p as f64).sqrt();
        let prob = 1.0 / (1.0 + (-t).exp());
        if rng.gen_range(0.0..1.0) < prob {
            1.0
        } else {
            0.0
        }
    });
    Dataset {
        features,
        labels,
        feature_names: (0..p).map(|i| format!("x{i}")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn bundled_snapshot_loads() {
        let ds = load_dataset_csv(bundled_train_path()).unwrap();
        assert_eq!(ds.n_samples(), 455);
        assert_eq!(ds.n_features(), 30);
        assert!(ds.labels.iter().all(|&l| l == 0.0 || l == 1.0));
        // both classes present in the training split
        let ones = ds.labels.iter().filter(|&&l| l == 1.0).count();
        assert!(ones > 0 && ones < 455);
    }

    #[test]
    fn parse_error_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "a,b,label").unwrap();
        writeln!(f, "1.0,2.0,1").unwrap();
        writeln!(f, "1.0,oops,0").unwrap();
        drop(f);
        match load_dataset_csv(&path).unwrap_err() {
            ProblemError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_binary_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad_label.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "a,label").unwrap();
        writeln!(f, "1.0,2").unwrap();
        drop(f);
        match load_dataset_csv(&path).unwrap_err() {
            ProblemError::NonBinaryLabel { line } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = make_synthetic_dataset(20, 4, 3);
        let b = make_synthetic_dataset(20, 4, 3);
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        assert!(a.labels.iter().all(|&l| l == 0.0 || l == 1.0));
    }

    #[test]
    fn head_takes_prefix() {
        let a = make_synthetic_dataset(20, 4, 3);
        let h = a.head(5).unwrap();
        assert_eq!(h.n_samples(), 5);
        assert_eq!(h.features.row(0), a.features.row(0));
        assert!(a.head(21).is_err());
    }
}
