//! Mask datasets: `path,label` manifests over PGM masks, the synthetic
//! gesture-shape generator and synthetic camera footage.

mod synth;
mod video;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{pnm, BinaryMask};

pub use synth::{prototype, synth_generate, synth_masks, Jitter, Shape, SynthClass, SynthSpec};
pub use video::{FrameTruth, SyntheticVideo, VideoSpec, SKIN_RGB};

/// File name of the manifest inside a dataset directory.
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Labeled mask files. Paths are relative to `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<(PathBuf, String)>,
    /// Unique labels in order of first appearance.
    pub class_names: Vec<String>,
}

impl Manifest {
    /// Build from entries, deriving `class_names`. Duplicate paths are rejected.
    pub fn new(root: impl Into<PathBuf>, entries: Vec<(PathBuf, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut class_names: Vec<String> = Vec::new();
        for (i, (path, label)) in entries.iter().enumerate() {
            if !seen.insert(path.clone()) {
                return Err(Error::parse(
                    format!("manifest row {}", i + 2),
                    format!("duplicate path `{}`", path.display()),
                ));
            }
            if label.is_empty() {
                return Err(Error::parse(format!("manifest row {}", i + 2), "empty label"));
            }
            if !class_names.contains(label) {
                class_names.push(label.clone());
            }
        }
        Ok(Self {
            root: root.into(),
            entries,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn full_path(&self, i: usize) -> PathBuf {
        self.root.join(&self.entries[i].0)
    }

    /// Class index of entry `i`.
    pub fn label_index(&self, i: usize) -> usize {
        let label = &self.entries[i].1;
        self.class_names.iter().position(|c| c == label).expect("label in class_names")
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.label_index(i)).collect()
    }

    pub fn load_mask(&self, i: usize) -> Result<BinaryMask> {
        load_mask(self.full_path(i))
    }

    pub fn load_all(&self) -> Result<Vec<BinaryMask>> {
        (0..self.len()).map(|i| self.load_mask(i)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["path", "label"]).expect("vec write");
        for (path, label) in &self.entries {
            w.write_record([path.to_string_lossy().as_ref(), label.as_str()]).expect("vec write");
        }
        String::from_utf8(w.into_inner().expect("vec flush")).expect("utf8 input")
    }

    /// Write `manifest.csv` into `root`.
    pub fn save(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, self.to_csv()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Parse a `path,label` manifest. Relative paths resolve against the
/// manifest's directory and must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = |row: usize| format!("{}:{row}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(ctx(1), e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "path" || &header[1] != "label" {
        return Err(Error::parse(ctx(1), "header must be `path,label`"));
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::parse(ctx(row), e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::parse(ctx(row), format!("expected 2 fields, got {}", record.len())));
        }
        let rel = PathBuf::from(&record[0]);
        if record[0].is_empty() {
            return Err(Error::parse(ctx(row), "empty path"));
        }
        if !root.join(&rel).is_file() {
            return Err(Error::parse(ctx(row), format!("missing file `{}`", rel.display())));
        }
        entries.push((rel, record[1].to_string()));
    }
    Manifest::new(root, entries).map_err(|e| match e {
        Error::Parse { context, message } => Error::parse(format!("{}: {context}", path.display()), message),
        other => other,
    })
}

/// Read a `{0, 255}` PGM mask.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    pnm::read_mask(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, mask: &BinaryMask) {
        let p = dir.join(name);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        pnm::write_mask(p, mask).unwrap();
    }

    #[test]
    fn two_rows() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a/0.pgm", &BinaryMask::full(4, 4));
        write(dir.path(), "b/0.pgm", &BinaryMask::empty(4, 4));
        fs::write(dir.path().join("manifest.csv"), "path,label\na/0.pgm,a\nb/0.pgm,b\n").unwrap();
        let m = load_manifest(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.class_names, vec!["a", "b"]);
        assert_eq!(m.labels(), vec![0, 1]);
        assert_eq!(m.load_mask(0).unwrap(), BinaryMask::full(4, 4));
        assert_eq!(m.to_csv(), "path,label\na/0.pgm,a\nb/0.pgm,b\n");
    }

    #[test]
    fn duplicate_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a/0.pgm", &BinaryMask::full(4, 4));
        fs::write(dir.path().join("manifest.csv"), "path,label\na/0.pgm,a\na/0.pgm,b\n").unwrap();
        let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a/0.pgm", &BinaryMask::full(4, 4));
        let cases = [
            ("label,path\n", ":1"),
            ("path,label\na/0.pgm\n", ":2"),
            ("path,label\na/0.pgm,a,extra\n", ":2"),
            ("path,label\na/0.pgm,a\nnope.pgm,a\n", ":3"),
        ];
        for (text, row) in cases {
            fs::write(dir.path().join("manifest.csv"), text).unwrap();
            let err = load_manifest(dir.path().join("manifest.csv")).unwrap_err().to_string();
            assert!(err.contains(row), "{text:?}: {err}");
        }
    }

    #[test]
    fn mask_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(7, 5, |r, c| (r + c) % 3 == 0);
        write(dir.path(), "m.pgm", &m);
        let bytes = fs::read(dir.path().join("m.pgm")).unwrap();
        let back = load_mask(dir.path().join("m.pgm")).unwrap();
        assert_eq!(back, m);
        write(dir.path(), "n.pgm", &back);
        assert_eq!(fs::read(dir.path().join("n.pgm")).unwrap(), bytes);
    }

    #[test]
    fn non_binary_pixels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.pgm"), b"P5\n2 1\n255\n\x00\x07").unwrap();
        let err = load_mask(dir.path().join("m.pgm")).unwrap_err().to_string();
        assert!(err.contains("byte 12"), "{err}");
    }
}
