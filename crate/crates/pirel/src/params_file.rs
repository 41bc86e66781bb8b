//! Text parameter files.
//!
//! ```text
//! pirel-parameters 1
//! network {"input_width":1,...}
//! digest 3f1c...            sha256 of the canonical layout, e.g. 1>50:tanh>4:softmax
//! shapes 50x1 4x50          (out x in) per layer
//! config {...}              training config the parameters came from, or null
//! checksum 9ab0...          sha256 over the little-endian value bits
//! values 254
//! 0.123...                  one value per line, row-major weights then bias, layer by layer
//! ```
//!
//! Values use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pirel_core::neural::{NetworkSpec, ParameterSet};
use serde::Serialize;
use sha2::{Digest, Sha256};

const MAGIC: &str = "pirel-parameters 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFile {
    pub network: NetworkSpec,
    pub config: serde_json::Value,
    pub params: ParameterSet,
}

pub fn layout_digest(spec: &NetworkSpec) -> String {
    hex::encode(Sha256::digest(spec.canonical().as_bytes()))
}

fn value_checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

fn shapes_line(params: &ParameterSet) -> String {
    params.shapes().iter().map(|(o, i)| format!("{o}x{i}")).collect::<Vec<_>>().join(" ")
}

pub fn encode_parameters<C: Serialize>(spec: &NetworkSpec, params: &ParameterSet, config: Option<&C>) -> Result<String> {
    ensure!(params.matches(spec), "parameters do not match the layout {}", spec.canonical());
    let mut out = String::new();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "network {}", serde_json::to_string(spec)?)?;
    writeln!(out, "digest {}", layout_digest(spec))?;
    writeln!(out, "shapes {}", shapes_line(params))?;
    writeln!(out, "config {}", serde_json::to_string(&config)?)?;
    writeln!(out, "checksum {}", value_checksum(params.as_slice()))?;
    writeln!(out, "values {}", params.len())?;
    for v in params.as_slice() {
        writeln!(out, "{v:?}")?;
    }
    Ok(out)
}

pub fn decode_parameters(text: &str) -> Result<ParameterFile> {
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<&str> {
        let line = lines.next().with_context(|| format!("missing `{key}` line"))?;
        line.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')).with_context(|| format!("expected `{key}`, found {line:?}"))
    };
    let magic = field("pirel-parameters")?;
    ensure!(magic == "1", "unsupported parameter file version {magic}");
    let network: NetworkSpec = serde_json::from_str(field("network")?).context("network line")?;
    network.validate()?;
    let digest = field("digest")?;
    ensure!(digest == layout_digest(&network), "layout digest does not match the network line");
    let shapes = field("shapes")?.to_owned();
    let config: serde_json::Value = serde_json::from_str(field("config")?).context("config line")?;
    let checksum = field("checksum")?.to_owned();
    let count: usize = field("values")?.parse().context("value count")?;
    let values = lines
        .by_ref()
        .take(count)
        .enumerate()
        .map(|(k, l)| l.trim().parse::<f64>().with_context(|| format!("value {k}: {l:?}")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(values.len() == count, "expected {count} values, found {}", values.len());
    if lines.any(|l| !l.trim().is_empty()) {
        bail!("trailing content after {count} values");
    }
    ensure!(checksum == value_checksum(&values), "value checksum mismatch");
    let params = ParameterSet::from_values(&network, values)?;
    ensure!(shapes == shapes_line(&params), "shapes line {shapes:?} does not match the network");
    Ok(ParameterFile { network, config, params })
}

pub fn write_parameters<C: Serialize>(path: &Path, spec: &NetworkSpec, params: &ParameterSet, config: Option<&C>) -> Result<()> {
    std::fs::write(path, encode_parameters(spec, params, config)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_parameters(path: &Path) -> Result<ParameterFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    decode_parameters(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pirel_core::neural::{initialize_parameters, Activation, LayerSpec};

    fn spec() -> NetworkSpec {
        NetworkSpec::mlp(1, 2, 5, Activation::Tanh, LayerSpec::new(4, Activation::Softmax)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = spec();
        let mut params = initialize_parameters(&spec, 9);
        params.as_mut_slice()[0] = f64::MIN_POSITIVE / 3.0;
        params.as_mut_slice()[1] = -0.0;
        params.as_mut_slice()[2] = 1.0 / 3.0;
        let text = encode_parameters(&spec, &params, Some(&serde_json::json!({"seed": 9}))).unwrap();
        let back = decode_parameters(&text).unwrap();
        assert_eq!(back.network, spec);
        assert_eq!(back.config["seed"], 9);
        let bits = |p: &ParameterSet| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&params));
    }

    #[test]
    fn corruption_is_detected() {
        let spec = spec();
        let params = initialize_parameters(&spec, 1);
        let text = encode_parameters::<()>(&spec, &params, None).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let last = lines.len() - 1;
        lines[last] = "0.5";
        assert!(decode_parameters(&lines.join("\n")).unwrap_err().to_string().contains("checksum"));
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(decode_parameters(&truncated).is_err());
        assert!(decode_parameters(&text.replacen("digest ", "digest 00", 1)).is_err());
    }
}
