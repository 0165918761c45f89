use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_core::{FeatureMatrix, Graph};

use super::metrics::edge_homophily;

pub const EDGES_FILE: &str = "edges.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLITS_FILE: &str = "splits.json";

/// Three disjoint node masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<bool>,
    pub valid: Vec<bool>,
    pub test: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SplitIndices {
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

impl Splits {
    pub fn from_indices(n: usize, train: &[usize], valid: &[usize], test: &[usize]) -> Result<Self> {
        let mut owner = vec![None::<&str>; n];
        let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
        for ((name, idx), mask) in [("train", train), ("valid", valid), ("test", test)]
            .into_iter()
            .zip(masks.iter_mut())
        {
            for &i in idx {
                if i >= n {
                    return Err(Error::Dataset(format!("{name} split index {i} out of range 0..{n}")));
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::Dataset(format!("node {i} appears in both {prev} and {name} splits")));
                }
                owner[i] = Some(name);
                mask[i] = true;
            }
        }
        let [train, valid, test] = masks;
        Ok(Self { train, valid, test })
    }

    pub fn train_indices(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn valid_indices(&self) -> Vec<usize> {
        indices(&self.valid)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        indices(&self.test)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.valid), c(&self.test))
    }

    fn is_disjoint(&self) -> bool {
        (0..self.train.len()).all(|i| (self.train[i] as u8 + self.valid[i] as u8 + self.test[i] as u8) <= 1)
    }
}

/// Graph, node features, labels and (optionally) a train/valid/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Option<Splits>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.nrows() != n || labels.len() != n {
            return Err(Error::Dataset(format!(
                "node-count mismatch: graph has {n} nodes, features {} rows, labels {} entries",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some((i, v)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite feature {v} at flat index {i}")));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Dataset(format!("label {l} of node {i} is outside 0..{num_classes}")));
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            splits: None,
        })
    }

    pub fn with_splits(mut self, splits: Splits) -> Result<Self> {
        let n = self.num_nodes();
        if splits.train.len() != n || splits.valid.len() != n || splits.test.len() != n {
            return Err(Error::Dataset(format!("split masks must have length {n}")));
        }
        if !splits.is_disjoint() {
            return Err(Error::Dataset("split masks overlap".into()));
        }
        self.splits = Some(splits);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn homophily(&self) -> Result<f64> {
        edge_homophily(&self.graph, &self.labels)
    }

    pub fn splits(&self) -> Result<&Splits> {
        self.splits
            .as_ref()
            .ok_or_else(|| Error::Dataset(format!("dataset `{}` has no train/valid/test split", self.name)))
    }
}

/// Formats a real with 17 significant digits, enough for a lossless round trip.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers; handles LF and CRLF.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let row = line
            .split(',')
            .map(|tok| {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(path, line_no, format!("invalid real `{}`", tok.trim())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(path, line_no, format!("non-finite feature `{}`", tok.trim())))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    FeatureMatrix::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

fn read_labels(path: &Path) -> Result<(Vec<usize>, Option<usize>, Vec<usize>)> {
    let text = read_text(path)?;
    let mut declared = None;
    let mut labels = Vec::new();
    let mut line_numbers = Vec::new();
    for (line_no, line) in content_lines(&text) {
        if let Some(header) = line.strip_prefix('#') {
            let value = header
                .trim()
                .strip_prefix("classes=")
                .ok_or_else(|| parse_err(path, line_no, format!("unrecognised header `{line}`")))?;
            if !labels.is_empty() || declared.is_some() {
                return Err(parse_err(path, line_no, "the `#classes=C` header must be the first line"));
            }
            let c: usize = value
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("invalid class count `{value}`")))?;
            declared = Some(c);
            continue;
        }
        let l: usize = line
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("invalid label `{line}`")))?;
        labels.push(l);
        line_numbers.push(line_no);
    }
    Ok((labels, declared, line_numbers))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(&text) {
        if line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, line_no, format!("expected `u,v`, found `{line}`")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("invalid node index `{s}`")))
        };
        let (u, v) = (parse(u)?, parse(v)?);
        if u >= n || v >= n {
            return Err(parse_err(
                path,
                line_no,
                format!("edge ({u}, {v}) references a node outside 0..{n}"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Loads a canonical dataset directory (`edges.csv`, `features.csv`,
/// `labels.csv`, optional `splits.json`).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let file = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Dataset(format!("missing file {}", p.display())))
        }
    };
    let features_path = file(FEATURES_FILE)?;
    let labels_path = file(LABELS_FILE)?;
    let edges_path = file(EDGES_FILE)?;

    let features = read_features(&features_path)?;
    let (labels, declared, label_lines) = read_labels(&labels_path)?;
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Dataset(format!(
            "node-count mismatch: {} has {n} rows but {} has {} labels",
            features_path.display(),
            labels_path.display(),
            labels.len()
        )));
    }
    let num_classes = match declared {
        Some(c) => c,
        None => labels.iter().max().map_or(0, |m| m + 1),
    };
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(parse_err(
            &labels_path,
            label_lines[i],
            format!("label {l} out of range 0..{num_classes}"),
        ));
    }
    let graph = Graph::new(n, read_edges(&edges_path, n)?)?;
    let name = dir
        .file_name()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let mut dataset = Dataset::new(name, graph, features, labels, num_classes)?;

    let splits_path = dir.join(SPLITS_FILE);
    if splits_path.is_file() {
        let idx: SplitIndices = serde_json::from_str(&read_text(&splits_path)?)
            .map_err(|e| Error::Dataset(format!("{}: {e}", splits_path.display())))?;
        let splits = Splits::from_indices(n, &idx.train, &idx.valid, &idx.test)
            .map_err(|e| Error::Dataset(format!("{}: {e}", splits_path.display())))?;
        dataset = dataset.with_splits(splits)?;
    }
    Ok(dataset)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `dataset` in the canonical directory layout.
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;

    let mut edges = String::new();
    for &(u, v) in dataset.graph.edges() {
        edges.push_str(&format!("{u},{v}\n"));
    }
    write_text(&dir.join(EDGES_FILE), &edges)?;
    write_text(&dir.join(FEATURES_FILE), &matrix_to_csv(&dataset.features))?;

    let mut labels = format!("#classes={}\n", dataset.num_classes);
    for l in &dataset.labels {
        labels.push_str(&format!("{l}\n"));
    }
    write_text(&dir.join(LABELS_FILE), &labels)?;

    let splits_path = dir.join(SPLITS_FILE);
    match &dataset.splits {
        Some(s) => {
            let idx = SplitIndices {
                train: s.train_indices(),
                valid: s.valid_indices(),
                test: s.test_indices(),
            };
            write_text(&splits_path, &serde_json::to_string(&idx)?)?;
        }
        None if splits_path.exists() => {
            fs::remove_file(&splits_path).map_err(|e| Error::io(format!("removing {}", splits_path.display()), e))?;
        }
        None => {}
    }
    Ok(())
}

/// Dense matrix as CSV, one row per line, 17 significant digits.
pub fn matrix_to_csv(m: &FeatureMatrix) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Reads a dense CSV matrix written by [`matrix_to_csv`].
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    read_features(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn fixture(dir: &Path) {
        write(dir, FEATURES_FILE, "1.0,0.5\r\n-2,3e-1\r\n");
        write(dir, LABELS_FILE, "#classes=3\n0\n2\n");
        write(dir, EDGES_FILE, "0,1\n");
    }

    #[test]
    fn minimal_fixture_loads() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        let d = load_dataset(tmp.path()).unwrap();
        assert_eq!(d.num_nodes(), 2);
        assert_eq!(d.num_classes, 3);
        assert_eq!(d.features, array![[1.0, 0.5], [-2.0, 0.3]]);
        assert_eq!(d.labels, vec![0, 2]);
        assert_eq!(d.graph.edges(), &[(0, 1)]);
        assert!(d.splits.is_none());
    }

    #[test]
    fn class_count_inferred_without_header() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), LABELS_FILE, "0\n4\n");
        assert_eq!(load_dataset(tmp.path()).unwrap().num_classes, 5);
    }

    #[test]
    fn duplicate_edges_are_deduplicated() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        let clean = load_dataset(tmp.path()).unwrap();
        write(tmp.path(), EDGES_FILE, "0,1\n1,0\n0,1\n1,1\n");
        assert_eq!(load_dataset(tmp.path()).unwrap(), clean);
    }

    #[test]
    fn errors_name_file_and_line() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), LABELS_FILE, "#classes=2\n0\n2\n");
        let err = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("labels.csv:3"), "{err}");

        fixture(tmp.path());
        write(tmp.path(), FEATURES_FILE, "1,2\nNaN,1\n");
        let err = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("features.csv:2") && err.contains("non-finite"), "{err}");

        fixture(tmp.path());
        write(tmp.path(), EDGES_FILE, "0,1\n0,7\n");
        let err = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("edges.csv:2"), "{err}");

        fixture(tmp.path());
        write(tmp.path(), LABELS_FILE, "0\n1\n1\n");
        let err = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("node-count mismatch"), "{err}");

        fs::remove_file(tmp.path().join(EDGES_FILE)).unwrap();
        let err = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(err.contains("missing file") && err.contains("edges.csv"), "{err}");
    }

    #[test]
    fn splits_json_is_validated() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), SPLITS_FILE, r#"{"train":[0],"valid":[],"test":[1]}"#);
        let d = load_dataset(tmp.path()).unwrap();
        assert_eq!(d.splits().unwrap().counts(), (1, 0, 1));

        write(tmp.path(), SPLITS_FILE, r#"{"train":[0],"valid":[0],"test":[]}"#);
        assert!(load_dataset(tmp.path()).is_err());
    }

    #[test]
    fn save_then_load_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path());
        write(tmp.path(), SPLITS_FILE, r#"{"train":[1],"valid":[0],"test":[]}"#);
        let first = load_dataset(tmp.path()).unwrap();
        let out = tmp.path().join("copy");
        save_dataset(&first, &out).unwrap();
        let mut second = load_dataset(&out).unwrap();
        second.name = first.name.clone();
        assert_eq!(first, second);
    }

    #[test]
    fn format_real_is_lossless() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 0.0] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }
}
