//! `GKW1` weight files: magic, version u32, tensor count u32, then per
//! tensor a u16 name length, UTF-8 name, u8 rank, u32 dims and
//! little-endian f32 values.

use std::path::Path;

use super::models::Network;
use super::{Classifier, ClassifierConfig};
use crate::error::{Error, Result};

pub const WEIGHT_MAGIC: &[u8; 4] = b"GKW1";
pub const WEIGHT_VERSION: u32 = 1;

const META_CONFIG: &str = "meta.config";
const META_CLASSES: &str = "meta.classes";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightFile {
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl WeightFile {
    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, d)| d.as_slice())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHT_MAGIC);
        out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, dims, data) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dims.len() as u8);
            for &d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], context: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, context };
        if r.take(4)? != WEIGHT_MAGIC {
            return Err(r.err("bad magic, not a GKW1 weight file"));
        }
        let version = r.u32()?;
        if version != WEIGHT_VERSION {
            return Err(r.err(&format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.err("tensor name is not UTF-8"))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let dims: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| r.err("tensor too large"))?)?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(r.err(&format!("tensor `{name}` holds non-finite values")));
            }
            tensors.push((name, dims, data));
        }
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes after the last tensor"));
        }
        Ok(Self { tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, message: &str) -> Error {
        Error::parse(self.context.to_string(), format!("{message} (at byte {})", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn text_tensor(name: &str, text: &str) -> (String, Vec<usize>, Vec<f32>) {
    let data: Vec<f32> = text.bytes().map(f32::from).collect();
    (name.to_string(), vec![data.len()], data)
}

fn tensor_text(file: &WeightFile, name: &str, context: &str) -> Result<String> {
    let data = file
        .get(name)
        .ok_or_else(|| Error::parse(context.to_string(), format!("missing `{name}` tensor")))?;
    let bytes: Vec<u8> = data.iter().map(|&v| v as u8).collect();
    String::from_utf8(bytes).map_err(|_| Error::parse(context.to_string(), format!("`{name}` is not UTF-8")))
}

pub fn save_weights(path: impl AsRef<Path>, classifier: &mut Classifier) -> Result<()> {
    let path = path.as_ref();
    let config = serde_json::to_string(&classifier.config).expect("config serializes");
    let classes = serde_json::to_string(&classifier.class_names).expect("names serialize");
    let mut file = WeightFile {
        tensors: vec![text_tensor(META_CONFIG, &config), text_tensor(META_CLASSES, &classes)],
    };
    for p in classifier.network().params_mut() {
        file.tensors
            .push((p.name.clone(), p.value.shape().to_vec(), p.value.data().to_vec()));
    }
    std::fs::write(path, file.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Classifier> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let file = WeightFile::decode(&bytes, &context)?;
    let config: ClassifierConfig = serde_json::from_str(&tensor_text(&file, META_CONFIG, &context)?)
        .map_err(|e| Error::parse(context.clone(), e.to_string()))?;
    let names: Vec<String> = serde_json::from_str(&tensor_text(&file, META_CLASSES, &context)?)
        .map_err(|e| Error::parse(context.clone(), e.to_string()))?;
    let mut network = Network::new(&config)?;
    network.load_params(|name| file.get(name))?;
    let classifier = Classifier::from_parts(config, names, network);
    if classifier.class_names.len() != classifier.config.n_classes {
        return Err(Error::parse(context, "class names do not match n_classes"));
    }
    Ok(classifier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Arch;

    #[test]
    fn round_trip_preserves_logits() {
        let dir = tempfile::tempdir().unwrap();
        for arch in [Arch::TinyCnn, Arch::MicroVit] {
            let mut cfg = ClassifierConfig::toy(arch);
            cfg.seed = 17;
            let mut clf = Classifier::new(cfg, vec!["a".into(), "b".into()]).unwrap();
            let probe: Vec<f32> = (0..3 * 256).map(|i| ((i * 7) % 5 == 0) as u8 as f32).collect();
            let before = clf.logits(&probe).unwrap();
            let path = dir.path().join("w.gkw");
            clf.save(&path).unwrap();
            let mut back = Classifier::load(&path).unwrap();
            assert_eq!(back.config, clf.config);
            assert_eq!(back.logits(&probe).unwrap(), before);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let file = WeightFile {
            tensors: vec![("x".into(), vec![2], vec![1.0, 2.0])],
        };
        let bytes = file.encode();
        assert_eq!(WeightFile::decode(&bytes, "t").unwrap(), file);
        assert!(WeightFile::decode(&bytes[..bytes.len() - 1], "t").is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(WeightFile::decode(&bad, "t").is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(WeightFile::decode(&extra, "t").is_err());
    }
}
