//! LIBSVM ingestion, seeded train/test splits and per-feature split candidates.
//!
//! Rows are kept sparse. A feature absent from a row has value 0.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::{self, RunRng};

/// How labels in the file are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Labels must be {-1,+1} or {0,1}; the latter is mapped to {-1,+1}.
    #[default]
    Classification,
    /// Labels are kept as real values.
    Regression,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub labels: LabelMode,
    /// Force the feature count instead of using the largest index seen.
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from 0-based sparse rows. Indices in each row must be
    /// strictly increasing and below `n_features`.
    pub fn new(n_features: usize, rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            for w in row.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: feature indices not strictly increasing"
                    )));
                }
            }
            if let Some(&(last, _)) = row.last() {
                if last >= n_features {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: feature {last} >= n_features {n_features}"
                    )));
                }
            }
            if row.iter().any(|&(_, v)| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {i}: non-finite value")));
            }
        }
        Ok(Self { n_features, rows, labels })
    }

    /// Dense constructor, mostly for tests and synthetic designs. Zeros are dropped.
    pub fn from_dense(features: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n_features = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != n_features) {
            return Err(Error::Dimension("ragged dense feature matrix".into()));
        }
        let rows = features
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(g, v)| (g, *v))
                    .collect()
            })
            .collect();
        Self::new(n_features, rows, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Value of feature `g` in row `i`, 0 when absent.
    pub fn value(&self, i: usize, g: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&g, |&(idx, _)| idx) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Column-major view: for each feature, the (sample, value) pairs with a
    /// nonzero value, in sample order.
    pub fn feature_columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_features];
        for (i, row) in self.rows.iter().enumerate() {
            for &(g, v) in row {
                if v != 0.0 {
                    cols[g].push((i, v));
                }
            }
        }
        cols
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            n_features: self.n_features,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...`, 1-based ascending indices.
pub fn parse_libsvm<R: Read>(input: R, opts: &ParseOptions) -> Result<Dataset> {
    let reader = BufReader::new(input);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = line.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse { line: lineno, msg: "non-finite label".into() });
        }

        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse { line: lineno, msg: "feature indices are 1-based".into() });
            }
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} not ascending (after {prev})"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse { line: lineno, msg: format!("non-finite value for {idx}") });
            }
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        rows.push(row);
        labels.push(label);
    }

    let n_features = match opts.n_features {
        Some(n) if n < max_index => {
            return Err(Error::InvalidArgument(format!(
                "feature index {max_index} exceeds requested n_features {n}"
            )))
        }
        Some(n) => n,
        None => max_index,
    };

    if opts.labels == LabelMode::Classification {
        map_binary_labels(&mut labels)?;
    }
    Dataset::new(n_features, rows, labels)
}

pub fn read_libsvm(path: &Path, opts: &ParseOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_libsvm(file, opts).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })
}

fn map_binary_labels(labels: &mut [f64]) -> Result<()> {
    if labels.iter().all(|&y| y == 1.0 || y == -1.0) {
        return Ok(());
    }
    if labels.iter().all(|&y| y == 0.0 || y == 1.0) {
        for y in labels.iter_mut() {
            *y = if *y == 0.0 { -1.0 } else { 1.0 };
        }
        return Ok(());
    }
    Err(Error::InvalidArgument(
        "classification labels must be {-1,+1} or {0,1}".into(),
    ))
}

/// Seeded split. The train part gets `round(train_fraction * n)` rows, clamped
/// so both parts are nonempty; each part keeps the original row order.
pub fn train_test_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = d.n_samples();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} samples")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let mut rng = RunRng::new(seed, sampling::SPLIT_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    sampling::partial_shuffle(&mut order, n, &mut rng);
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.subset(train), d.subset(test)))
}

/// Per-feature ascending split thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidates {
    thresholds: Vec<Vec<f64>>,
}

impl SplitCandidates {
    pub fn new(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        for (g, t) in thresholds.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "thresholds for feature {g} must be finite and strictly increasing"
                )));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    pub fn feature(&self, g: usize) -> &[f64] {
        &self.thresholds[g]
    }

    pub fn total(&self) -> usize {
        self.thresholds.iter().map(Vec::len).sum()
    }
}

/// Empirical quantile thresholds of every feature.
///
/// With `v` the sorted distinct values of a feature (`nd` of them), level
/// `k / q_count` for `k = 1..q_count` maps to `v[ceil(k * nd / q_count) - 1]`.
/// The maximum value is never a threshold, so every threshold leaves samples
/// on both sides.
pub fn feature_quantiles(d: &Dataset, q_count: usize) -> Result<SplitCandidates> {
    if q_count == 0 {
        return Err(Error::InvalidArgument("q_count must be >= 1".into()));
    }
    let n = d.n_samples();
    let thresholds = d
        .feature_columns()
        .into_iter()
        .map(|col| {
            let mut distinct: Vec<f64> = col.iter().map(|&(_, v)| v).collect();
            if col.len() < n {
                distinct.push(0.0);
            }
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            quantile_thresholds(&distinct, q_count)
        })
        .collect();
    Ok(SplitCandidates { thresholds })
}

fn quantile_thresholds(distinct: &[f64], q_count: usize) -> Vec<f64> {
    let nd = distinct.len();
    if nd < 2 {
        return Vec::new();
    }
    let mut out: Vec<f64> = Vec::new();
    for k in 1..q_count {
        // ceil(k * nd / q) - 1 in exact integer arithmetic
        let idx = (k * nd).div_ceil(q_count) - 1;
        if idx + 1 >= nd {
            break;
        }
        let s = distinct[idx];
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes(), &ParseOptions::default())
    }

    #[test]
    fn single_line() {
        let d = parse("+1 3:1.5\n").unwrap();
        assert_eq!(d.n_samples(), 1);
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.labels(), &[1.0]);
        assert_eq!(d.value(0, 2), 1.5);
        assert_eq!(d.value(0, 0), 0.0);
    }

    #[test]
    fn empty_file() {
        let d = parse("").unwrap();
        assert_eq!(d.n_samples(), 0);
        assert_eq!(d.n_features(), 0);
    }

    #[test]
    fn zero_one_labels_are_mapped() {
        let d = parse("0 1:1\n1 2:1\n\n").unwrap();
        assert_eq!(d.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn other_labels_rejected_for_classification() {
        assert!(parse("2 1:1\n1 1:1\n").is_err());
        let d = parse_libsvm(
            "2.5 1:1\n-7 1:3\n".as_bytes(),
            &ParseOptions { labels: LabelMode::Regression, n_features: None },
        )
        .unwrap();
        assert_eq!(d.labels(), &[2.5, -7.0]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("1 1:1\n1 2:x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse("1 1:1\n-1 4:1 2:1\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("ascending"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1 0:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn n_features_override() {
        let opts = ParseOptions { n_features: Some(10), ..Default::default() };
        let d = parse_libsvm("1 3:1\n".as_bytes(), &opts).unwrap();
        assert_eq!(d.n_features(), 10);
        let opts = ParseOptions { n_features: Some(2), ..Default::default() };
        assert!(parse_libsvm("1 3:1\n".as_bytes(), &opts).is_err());
    }

    fn line_dataset(n: usize) -> Dataset {
        let rows = (0..n).map(|i| vec![(0, i as f64 + 1.0)]).collect();
        Dataset::new(1, rows, vec![1.0; n]).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = line_dataset(10);
        let (tr, te) = train_test_split(&d, 0.8, 7).unwrap();
        assert_eq!((tr.n_samples(), te.n_samples()), (8, 2));
        let (tr2, te2) = train_test_split(&d, 0.8, 7).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);

        let mut all: Vec<f64> = tr.rows().iter().chain(te.rows()).map(|r| r[0].1).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (1..=10).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn split_large_rounding() {
        let rows = vec![Vec::new(); 32_561];
        let d = Dataset::new(1, rows, vec![1.0; 32_561]).unwrap();
        let (tr, te) = train_test_split(&d, 0.8, 1).unwrap();
        assert_eq!(tr.n_samples(), 26_049);
        assert_eq!(te.n_samples(), 32_561 - 26_049);
    }

    #[test]
    fn split_errors() {
        assert!(train_test_split(&line_dataset(1), 0.5, 0).is_err());
        assert!(train_test_split(&line_dataset(5), 1.0, 0).is_err());
        assert!(train_test_split(&line_dataset(5), 0.0, 0).is_err());
    }

    fn quantiles_of(values: &[f64], q: usize) -> Vec<f64> {
        let rows = values.iter().map(|&v| vec![(0, v)]).collect();
        let d = Dataset::new(1, rows, vec![1.0; values.len()]).unwrap();
        feature_quantiles(&d, q).unwrap().feature(0).to_vec()
    }

    #[test]
    fn quantile_examples() {
        assert!(quantiles_of(&[0.0, 0.0, 0.0, 0.0], 100).is_empty());
        assert_eq!(quantiles_of(&[1.0, 2.0, 3.0, 4.0], 2), vec![2.0]);
        assert_eq!(quantiles_of(&[1.0, 2.0], 100), vec![1.0]);
        // enough quantiles: every distinct value but the maximum
        assert_eq!(quantiles_of(&[5.0, 1.0, 3.0, 3.0, 2.0], 100), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn implicit_zeros_count_as_values() {
        let d = parse("1 1:2\n-1 2:1\n1 1:3\n").unwrap();
        let s = feature_quantiles(&d, 100).unwrap();
        assert_eq!(s.feature(0), &[0.0, 2.0]);
        assert_eq!(s.feature(1), &[0.0]);
    }

    #[test]
    fn quantile_count_bound() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let t = quantiles_of(&values, 10);
        assert_eq!(t.len(), 9);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }
}
