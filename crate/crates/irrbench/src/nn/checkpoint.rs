//! Textual model checkpoints.
//!
//! Layout, line by line: a version header, the store seed, one line of
//! configuration JSON, then per parameter a `param <name> <dims...>` line
//! followed by its values on one line. Floats are written in the shortest
//! form that parses back to the same bits, so save/load round-trips exactly
//! and identical models produce byte-identical files. Optimizer state
//! (velocities, pending gradients) is not part of a checkpoint.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const HEADER: &str = "irrbench-ckpt v1";

pub fn save(store: &ParamStore, config_json: &str, path: &Path) -> Result<()> {
    if config_json.contains('\n') {
        return Err(Error::InvalidArgument(
            "checkpoint config must be single-line JSON".into(),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HEADER}")?;
    writeln!(out, "seed {}", store.seed())?;
    writeln!(out, "config {config_json}")?;
    for name in store.names() {
        let tensor = store.get(name).expect("name comes from the store");
        write!(out, "param {name}")?;
        for dim in tensor.shape() {
            write!(out, " {dim}")?;
        }
        writeln!(out)?;
        let mut first = true;
        for v in tensor.data() {
            if first {
                write!(out, "{v}")?;
                first = false;
            } else {
                write!(out, " {v}")?;
            }
        }
        writeln!(out)?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(String, ParamStore)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Checkpoint("file ended early".into()))
    };

    let header = next()?;
    if header != HEADER {
        return Err(Error::Checkpoint(format!(
            "expected header {HEADER:?}, found {header:?}"
        )));
    }
    let seed_line = next()?;
    let seed: u64 = seed_line
        .strip_prefix("seed ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad seed line {seed_line:?}")))?;
    let config_line = next()?;
    let config = config_line
        .strip_prefix("config ")
        .ok_or_else(|| Error::Checkpoint(format!("bad config line {config_line:?}")))?
        .to_string();

    let mut store = ParamStore::new(seed);
    loop {
        let line = next()?;
        if line == "end" {
            break;
        }
        let rest = line
            .strip_prefix("param ")
            .ok_or_else(|| Error::Checkpoint(format!("expected param line, found {line:?}")))?;
        let mut parts = rest.split(' ');
        let name = parts
            .next()
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::Checkpoint("param line without a name".into()))?
            .to_string();
        let shape: Vec<usize> = parts
            .map(|d| {
                d.parse()
                    .map_err(|_| Error::Checkpoint(format!("bad dimension {d:?} for {name}")))
            })
            .collect::<Result<_>>()?;
        let values_line = next()?;
        let values: Vec<f64> = values_line
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Checkpoint(format!("bad value {s:?} in {name}")))
            })
            .collect::<Result<_>>()?;
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {shape:?} needs {expected} values, found {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("{name} holds non-finite values")));
        }
        let tensor = Tensor::from_vec(&shape, values).expect("length checked above");
        store
            .insert_raw(&name, tensor)
            .map_err(|_| Error::Checkpoint(format!("parameter {name} appears twice")))?;
    }
    Ok((config, store))
}
