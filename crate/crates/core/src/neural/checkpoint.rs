//! Text checkpoints: a `#`-prefixed header followed by one line per weight
//! row and one per bias vector, layer by layer. Values use the shortest
//! round-trip float form, so loading reproduces every bit.
//!
//! ```text
//! # fvmn-checkpoint/1
//! # spec = 30-64-64-64-1
//! # activation = relu
//! # parameters = 10369
//! # variable = T
//! # scalers = scalers.toml
//! # seed = 0
//! # train_config_hash = 3f9a...
//! W0 64x30
//! <30 values>
//! ...
//! b0 64
//! <64 values>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{param_count, Activation, Layer, Network, NetworkSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "fvmn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    /// Output variable name, when the network belongs to a surrogate bundle.
    pub variable: Option<String>,
    /// Path of the standardizer file, relative to the checkpoint.
    pub scalers: String,
    pub seed: u64,
    pub train_config_hash: String,
}

fn dims_string(spec: &NetworkSpec) -> String {
    let mut s = spec.input_dim.to_string();
    for h in &spec.hidden {
        write!(s, "-{h}").unwrap();
    }
    write!(s, "-{}", spec.output_dim).unwrap();
    s
}

fn row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

pub fn checkpoint_to_text(net: &Network, meta: &CheckpointMeta) -> String {
    let spec = net.spec();
    let mut out = String::new();
    writeln!(out, "# {CHECKPOINT_FORMAT}").unwrap();
    writeln!(out, "# spec = {}", dims_string(spec)).unwrap();
    writeln!(out, "# activation = {}", spec.activation.as_str()).unwrap();
    writeln!(out, "# parameters = {}", param_count(spec)).unwrap();
    writeln!(out, "# variable = {}", meta.variable.as_deref().unwrap_or("-")).unwrap();
    writeln!(out, "# scalers = {}", meta.scalers).unwrap();
    writeln!(out, "# seed = {}", meta.seed).unwrap();
    writeln!(out, "# train_config_hash = {}", meta.train_config_hash).unwrap();
    for (l, layer) in net.layers.iter().enumerate() {
        let (rows, cols) = layer.weights.dim();
        writeln!(out, "W{l} {rows}x{cols}").unwrap();
        for r in layer.weights.rows() {
            row(&mut out, r.iter().copied());
        }
        writeln!(out, "b{l} {}", layer.bias.len()).unwrap();
        row(&mut out, layer.bias.iter().copied());
    }
    out
}

fn parse_values(line: Option<&str>, expected: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    let line = line.ok_or_else(|| format!("{what}: unexpected end of file"))?;
    let v: Vec<f64> = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("{what}: {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != expected {
        return Err(format!("{what}: expected {expected} values, got {}", v.len()));
    }
    Ok(v)
}

pub fn checkpoint_from_text(text: &str) -> std::result::Result<(Network, CheckpointMeta), String> {
    let mut lines = text.lines().peekable();
    match lines.next() {
        Some(l) if l.trim() == format!("# {CHECKPOINT_FORMAT}") => {}
        other => return Err(format!("missing format line, got {other:?}")),
    }
    let mut header = BTreeMap::new();
    while let Some(line) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else { break };
        let (k, v) = rest.split_once('=').ok_or_else(|| format!("bad header line {line:?}"))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
        lines.next();
    }
    let get = |k: &str| header.get(k).cloned().ok_or_else(|| format!("missing header field {k}"));
    let dims: Vec<usize> = get("spec")?
        .split('-')
        .map(|d| d.parse::<usize>().map_err(|e| format!("spec: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if dims.len() < 2 {
        return Err("spec needs at least input and output widths".into());
    }
    let activation: Activation = get("activation")?.parse().map_err(|e: Error| e.to_string())?;
    let spec = NetworkSpec {
        input_dim: dims[0],
        hidden: dims[1..dims.len() - 1].to_vec(),
        output_dim: dims[dims.len() - 1],
        activation,
    };
    let declared: usize = get("parameters")?.parse().map_err(|_| "bad parameter count")?;
    if declared != param_count(&spec) {
        return Err(format!("header declares {declared} parameters, spec has {}", param_count(&spec)));
    }
    let variable = get("variable")?;
    let meta = CheckpointMeta {
        variable: (variable != "-").then_some(variable),
        scalers: get("scalers")?,
        seed: get("seed")?.parse().map_err(|_| "bad seed")?,
        train_config_hash: get("train_config_hash")?,
    };
    let mut layers = Vec::new();
    for (l, (fan_in, fan_out)) in spec.layer_shapes().into_iter().enumerate() {
        let tag = format!("W{l} {fan_out}x{fan_in}");
        if lines.next().map(str::trim) != Some(tag.as_str()) {
            return Err(format!("expected {tag:?}"));
        }
        let mut w = Vec::with_capacity(fan_in * fan_out);
        for r in 0..fan_out {
            w.extend(parse_values(lines.next(), fan_in, &format!("W{l} row {r}"))?);
        }
        let tag = format!("b{l} {fan_out}");
        if lines.next().map(str::trim) != Some(tag.as_str()) {
            return Err(format!("expected {tag:?}"));
        }
        let b = parse_values(lines.next(), fan_out, &format!("b{l}"))?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_out, fan_in), w).map_err(|e| e.to_string())?,
            bias: Array1::from_vec(b),
        });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err("trailing data after last layer".into());
    }
    let net = Network::from_layers(&spec, layers).map_err(|e| e.to_string())?;
    Ok((net, meta))
}

pub fn write_checkpoint(path: &Path, net: &Network, meta: &CheckpointMeta) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, checkpoint_to_text(net, meta)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(Network, CheckpointMeta)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_text(&text).map_err(|e| Error::parse(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for case in ['c', 'e', 'h'] {
            let spec = NetworkSpec::sweep_case(case, 30).unwrap();
            let mut net = Network::init(&spec, 17).unwrap();
            net.layers[0].bias[3] = 1.0 / 3.0;
            net.layers[1].bias[0] = -5e-324;
            let meta = CheckpointMeta {
                variable: Some("T".into()),
                scalers: "scalers.toml".into(),
                seed: 17,
                train_config_hash: "abc".into(),
            };
            let text = checkpoint_to_text(&net, &meta);
            let (back, meta_back) = checkpoint_from_text(&text).unwrap();
            assert_eq!(meta_back, meta);
            let bits = |n: &Network| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&net));
            assert_eq!(back.spec(), net.spec());
        }
    }

    #[test]
    fn header_reports_case_c_count() {
        let net = Network::zeros(&NetworkSpec::sweep_case('c', 30).unwrap()).unwrap();
        let text = checkpoint_to_text(&net, &CheckpointMeta::default());
        assert!(text.lines().any(|l| l == "# parameters = 10369"));
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let net = Network::init(&NetworkSpec::new(2, &[3], Activation::Relu), 0).unwrap();
        let text = checkpoint_to_text(&net, &CheckpointMeta::default());
        assert!(checkpoint_from_text(&text.replace("parameters = 13", "parameters = 12")).is_err());
        let cut: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(checkpoint_from_text(&cut).is_err());
    }
}
