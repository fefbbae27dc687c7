//! Single-file parameter container.
//!
//! Layout: the magic line `SMFGCKPT`, a UTF-8 header of one record per
//! line terminated by `end`, then every payload back to back as
//! little-endian `f64` in header order. Header records:
//!
//! ```text
//! version 1
//! meta <key> <value>
//! net <name> <sizes> <hidden-activation> <output-activation>
//! array <name> <len>
//! end
//! ```
//!
//! A `net` payload is the flat parameter vector (per layer: weights
//! row-major `out x in`, then biases).

use std::collections::BTreeMap;
use std::path::Path;

use super::{NetworkParams, NetworkSpec};
use crate::error::{Error, Result};

const MAGIC: &str = "SMFGCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    meta: BTreeMap<String, String>,
    networks: Vec<(String, NetworkParams)>,
    arrays: Vec<(String, Vec<f64>)>,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(ckpt_err(format!("invalid entry name '{name}'")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) -> Result<()> {
        check_name(key)?;
        let value = value.to_string();
        if value.contains('\n') {
            return Err(ckpt_err("metadata values must be single-line"));
        }
        self.meta.insert(key.to_string(), value);
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn add_network(&mut self, name: &str, params: &NetworkParams) -> Result<()> {
        check_name(name)?;
        self.networks.push((name.to_string(), params.clone()));
        Ok(())
    }

    pub fn add_array(&mut self, name: &str, data: &[f64]) -> Result<()> {
        check_name(name)?;
        self.arrays.push((name.to_string(), data.to_vec()));
        Ok(())
    }

    pub fn network(&self, name: &str) -> Result<&NetworkParams> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| ckpt_err(format!("checkpoint has no network '{name}'")))
    }

    /// Looks up a network and checks that it was saved with `expected`.
    pub fn network_checked(&self, name: &str, expected: &NetworkSpec) -> Result<NetworkParams> {
        let p = self.network(name)?;
        if p.spec() != expected {
            return Err(ckpt_err(format!(
                "network '{name}' has shape [{}], expected [{expected}]",
                p.spec()
            )));
        }
        Ok(p.clone())
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a.as_slice())
            .ok_or_else(|| ckpt_err(format!("checkpoint has no array '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC}\nversion {VERSION}\n");
        for (k, v) in &self.meta {
            header.push_str(&format!("meta {k} {v}\n"));
        }
        for (name, p) in &self.networks {
            header.push_str(&format!("net {name} {}\n", p.spec()));
        }
        for (name, a) in &self.arrays {
            header.push_str(&format!("array {name} {}\n", a.len()));
        }
        header.push_str("end\n");
        let mut out = header.into_bytes();
        let payloads = self
            .networks
            .iter()
            .map(|(_, p)| p.as_slice())
            .chain(self.arrays.iter().map(|(_, a)| a.as_slice()));
        for payload in payloads {
            for v in payload {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<String> {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| ckpt_err("truncated header"))?;
            let line = std::str::from_utf8(&rest[..nl]).map_err(|_| ckpt_err("header is not UTF-8"))?;
            pos += nl + 1;
            Ok(line.to_string())
        };
        if next_line()? != MAGIC {
            return Err(ckpt_err("not a checkpoint file (bad magic)"));
        }
        let version = next_line()?;
        if version != format!("version {VERSION}") {
            return Err(ckpt_err(format!("unsupported checkpoint '{version}'")));
        }
        let mut meta = BTreeMap::new();
        let mut net_specs = Vec::new();
        let mut array_lens = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let (kind, rest) = line.split_once(' ').ok_or_else(|| ckpt_err(format!("bad header line '{line}'")))?;
            match kind {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "net" => {
                    let (name, spec) = rest.split_once(' ').ok_or_else(|| ckpt_err(format!("bad net line '{line}'")))?;
                    net_specs.push((name.to_string(), spec.parse::<NetworkSpec>()?));
                }
                "array" => {
                    let (name, len) = rest.split_once(' ').ok_or_else(|| ckpt_err(format!("bad array line '{line}'")))?;
                    let len = len.parse::<usize>().map_err(|e| ckpt_err(format!("bad array length: {e}")))?;
                    array_lens.push((name.to_string(), len));
                }
                other => return Err(ckpt_err(format!("unknown header record '{other}'"))),
            }
        }
        let mut cursor = pos;
        let mut take = |len: usize| -> Result<Vec<f64>> {
            let end = cursor + len * 8;
            if end > bytes.len() {
                return Err(ckpt_err("payload shorter than the header declares"));
            }
            let vals = bytes[cursor..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            cursor = end;
            Ok(vals)
        };
        let mut networks = Vec::with_capacity(net_specs.len());
        for (name, spec) in net_specs {
            let data = take(spec.num_params())?;
            let params = NetworkParams::from_flat(&spec, data).map_err(|e| ckpt_err(format!("network '{name}': {e}")))?;
            networks.push((name, params));
        }
        let mut arrays = Vec::with_capacity(array_lens.len());
        for (name, len) in array_lens {
            arrays.push((name, take(len)?));
        }
        if cursor != bytes.len() {
            return Err(ckpt_err("trailing bytes after the last payload"));
        }
        Ok(Self { meta, networks, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
