//! Line-oriented layer list format used for custom networks.
//!
//! ```text
//! conv c1 in=1 out=8 kernel=16 stride=4 padding=8
//! batchnorm c1_bn channels=8
//! relu c1_relu
//! maxpool p1 size=4 stride=4
//! tconv d1 in=8 out=1 kernel=16 stride=4 padding=6
//! tap c1
//! ```

use std::collections::HashMap;
use std::fmt::Write;

use super::{ConvGeometry, LayerKind, LayerSpec, NetworkConfig};
use crate::error::{Error, Result};

pub(super) fn to_text(config: &NetworkConfig) -> String {
    let mut out = String::new();
    for l in &config.layers {
        let _ = match l.kind {
            LayerKind::Conv(g) => writeln!(out, "conv {} {}", l.name, geometry(g)),
            LayerKind::TransposedConv(g) => writeln!(out, "tconv {} {}", l.name, geometry(g)),
            LayerKind::MaxPool { size, stride } => {
                writeln!(out, "maxpool {} size={size} stride={stride}", l.name)
            }
            LayerKind::BatchNorm { channels } => {
                writeln!(out, "batchnorm {} channels={channels}", l.name)
            }
            LayerKind::Relu => writeln!(out, "relu {}", l.name),
        };
    }
    for t in &config.taps {
        let _ = writeln!(out, "tap {t}");
    }
    out
}

fn geometry(g: ConvGeometry) -> String {
    format!(
        "in={} out={} kernel={} stride={} padding={}",
        g.in_channels, g.out_channels, g.kernel_size, g.stride, g.padding
    )
}

pub(super) fn from_text(name: &str, text: &str) -> Result<NetworkConfig> {
    let mut layers = Vec::new();
    let mut taps = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::InvalidNetwork(format!("line {}: {msg}: `{line}`", lineno + 1));
        let mut words = line.split_whitespace();
        let kind = words.next().ok_or_else(|| bad("empty"))?;
        let layer_name = words.next().ok_or_else(|| bad("missing layer name"))?;
        let mut fields = HashMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v: usize = v.parse().map_err(|_| bad("expected an unsigned integer"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
        let conv_geometry = || -> Result<ConvGeometry> {
            Ok(ConvGeometry {
                in_channels: get("in")?,
                out_channels: get("out")?,
                kernel_size: get("kernel")?,
                stride: get("stride")?,
                padding: get("padding")?,
            })
        };
        let spec_kind = match kind {
            "conv" => LayerKind::Conv(conv_geometry()?),
            "tconv" => LayerKind::TransposedConv(conv_geometry()?),
            "maxpool" => LayerKind::MaxPool {
                size: get("size")?,
                stride: get("stride")?,
            },
            "batchnorm" => LayerKind::BatchNorm {
                channels: get("channels")?,
            },
            "relu" => LayerKind::Relu,
            "tap" => {
                taps.push(layer_name.to_string());
                continue;
            }
            _ => return Err(bad("unknown layer kind")),
        };
        layers.push(LayerSpec {
            name: layer_name.to_string(),
            kind: spec_kind,
        });
    }
    NetworkConfig::new(name, layers, taps)
}

#[cfg(test)]
mod tests {
    use crate::network::{build_autoencoder4, build_soundnet8, AutoencoderWidths};

    use super::*;

    #[test]
    fn builtins_survive_text_round_trip() {
        for net in [build_soundnet8(), build_autoencoder4(AutoencoderWidths::default())] {
            let back = from_text(&net.name, &to_text(&net)).unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn reports_line_of_error() {
        let err = from_text("custom", "relu r\nconv c in=1 out=2 kernel=3 stride=1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("padding"), "{err}");
    }
}
