//! Versioned plain-text `key = value` format for trained parameters.
//!
//! ```text
//! format = fsw-aml-params
//! version = 1
//! model = gnc
//! eta = 0.01
//! epochs = 100
//! seed = 7
//! bias = 0.25
//! weights = 1.5,-0.5
//! ```
//!
//! Vision parameters add `width` and `height`. Floats use Rust's shortest
//! round-trip formatting, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::gnc::{Hyperparams, ModelParams};
use crate::vision::ClassifierParams;

pub const FORMAT_TAG: &str = "fsw-aml-params";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unsupported format `{0}` or version")]
    Unsupported(String),
    #[error("expected a `{expected}` model, found `{found}`")]
    WrongModel {
        expected: &'static str,
        found: String,
    },
    #[error("{0} weights do not match the declared shape")]
    ShapeMismatch(usize),
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn header(out: &mut String, model: &str, hyper: &Hyperparams) {
    let _ = writeln!(out, "format = {FORMAT_TAG}");
    let _ = writeln!(out, "version = {VERSION}");
    let _ = writeln!(out, "model = {model}");
    let _ = writeln!(out, "eta = {:?}", hyper.eta);
    let _ = writeln!(out, "epochs = {}", hyper.epochs);
    let _ = writeln!(out, "seed = {}", hyper.seed);
}

pub fn write_gnc(params: &ModelParams, hyper: &Hyperparams) -> String {
    let mut out = String::new();
    header(&mut out, "gnc", hyper);
    let _ = writeln!(out, "bias = {:?}", params.bias);
    let _ = writeln!(out, "weights = {}", join(&params.weights));
    out
}

pub fn write_vision(params: &ClassifierParams, hyper: &Hyperparams) -> String {
    let mut out = String::new();
    header(&mut out, "vision", hyper);
    let _ = writeln!(out, "width = {}", params.width);
    let _ = writeln!(out, "height = {}", params.height);
    let _ = writeln!(out, "bias = {:?}", params.bias);
    let _ = writeln!(out, "weights = {}", join(&params.weights));
    out
}

struct Doc(BTreeMap<String, String>);

impl Doc {
    fn parse(text: &str, allowed: &[&str]) -> Result<Doc, KvError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(KvError::Syntax(i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(KvError::UnknownKey(k.to_owned()));
            }
            if map.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(KvError::DuplicateKey(k.to_owned()));
            }
        }
        let doc = Doc(map);
        let format = doc.get("format")?;
        if format != FORMAT_TAG || doc.get("version")? != VERSION.to_string() {
            return Err(KvError::Unsupported(format.to_owned()));
        }
        Ok(doc)
    }

    fn get(&self, key: &'static str) -> Result<&str, KvError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or(KvError::MissingKey(key))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &'static str) -> Result<T, KvError> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| KvError::BadValue {
            key: key.to_owned(),
            value: raw.to_owned(),
        })
    }

    fn floats(&self, key: &'static str) -> Result<Vec<f64>, KvError> {
        let raw = self.get(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| KvError::BadValue {
                    key: key.to_owned(),
                    value: s.to_owned(),
                })
            })
            .collect()
    }

    fn model(&self, expected: &'static str) -> Result<(), KvError> {
        let found = self.get("model")?;
        if found != expected {
            return Err(KvError::WrongModel {
                expected,
                found: found.to_owned(),
            });
        }
        Ok(())
    }

    fn hyper(&self) -> Result<Hyperparams, KvError> {
        Ok(Hyperparams {
            eta: self.parse_as("eta")?,
            epochs: self.parse_as("epochs")?,
            seed: self.parse_as("seed")?,
        })
    }
}

const GNC_KEYS: &[&str] = &[
    "format", "version", "model", "eta", "epochs", "seed", "bias", "weights",
];
const VISION_KEYS: &[&str] = &[
    "format", "version", "model", "eta", "epochs", "seed", "width", "height", "bias", "weights",
];

pub fn read_gnc(text: &str) -> Result<(ModelParams, Hyperparams), KvError> {
    let doc = Doc::parse(text, GNC_KEYS)?;
    doc.model("gnc")?;
    let params = ModelParams {
        weights: doc.floats("weights")?,
        bias: doc.parse_as("bias")?,
    };
    Ok((params, doc.hyper()?))
}

pub fn read_vision(text: &str) -> Result<(ClassifierParams, Hyperparams), KvError> {
    let doc = Doc::parse(text, VISION_KEYS)?;
    doc.model("vision")?;
    let width: u32 = doc.parse_as("width")?;
    let height: u32 = doc.parse_as("height")?;
    let weights = doc.floats("weights")?;
    if weights.len() != width as usize * height as usize {
        return Err(KvError::ShapeMismatch(weights.len()));
    }
    let params = ClassifierParams {
        width,
        height,
        weights,
        bias: doc.parse_as("bias")?,
    };
    Ok((params, doc.hyper()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper() -> Hyperparams {
        Hyperparams::new(0.01, 100, 7).unwrap()
    }

    #[test]
    fn gnc_layout() {
        let p = ModelParams {
            weights: vec![1.5, -0.5],
            bias: 0.25,
        };
        let text = write_gnc(&p, &hyper());
        assert_eq!(
            text,
            "format = fsw-aml-params\nversion = 1\nmodel = gnc\neta = 0.01\nepochs = 100\n\
             seed = 7\nbias = 0.25\nweights = 1.5,-0.5\n"
        );
        assert_eq!(read_gnc(&text).unwrap(), (p, hyper()));
    }

    #[test]
    fn rejects_unknown_key_and_wrong_model() {
        let p = ModelParams::zeros(1);
        let text = write_gnc(&p, &hyper());
        assert_eq!(
            read_gnc(&format!("{text}extra = 1\n")),
            Err(KvError::UnknownKey("extra".into()))
        );
        assert!(matches!(
            read_vision(&text),
            Err(KvError::UnknownKey(_) | KvError::WrongModel { .. })
        ));
        let bumped = text.replace("version = 1", "version = 2");
        assert!(matches!(read_gnc(&bumped), Err(KvError::Unsupported(_))));
    }

    #[test]
    fn vision_shape_checked() {
        let p = ClassifierParams::zeros(2, 2);
        let text = write_vision(&p, &hyper()).replace("width = 2", "width = 3");
        assert_eq!(read_vision(&text), Err(KvError::ShapeMismatch(4)));
    }

    proptest! {
        #[test]
        fn float_round_trip_is_exact(ws in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..8), b in -1e300f64..1e300) {
            let p = ModelParams { weights: ws, bias: b };
            let (back, _) = read_gnc(&write_gnc(&p, &hyper())).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
