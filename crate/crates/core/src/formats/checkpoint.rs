//! Binary checkpoint format.
//!
//! ```text
//! "SNDC"                     magic
//! u32                        version (1)
//! u32 len, utf8              network id: soundnet8 | soundnet5 | autoencoder4 | "custom\n" + layer list
//! u64 iteration, u64 seed, f64 loss
//! u32                        block count
//! per block:  u32 len, utf8 name, u32 rank, rank × u32 dims, f32 values
//! u32                        CRC-32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Blocks are named
//! `<layer>.weight`, `.bias`, `.gamma`, `.beta`, `.running_mean` and
//! `.running_var`, ordered by layer name.

use std::collections::BTreeMap;
use std::path::Path;

use super::binary::{Reader, Writer};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::network::{Architecture, LayerKind, LayerParams, NetworkConfig, Parameters};
use crate::ops::{BatchNormParams, ConvParams, RunningStats};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SNDC";
pub const CHECKPOINT_VERSION: u32 = 1;
const CUSTOM_PREFIX: &str = "custom\n";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainingMeta {
    pub iteration: u64,
    pub seed: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: NetworkConfig,
    pub params: Parameters<f32>,
    pub meta: TrainingMeta,
}

struct Block {
    dims: Vec<usize>,
    values: Vec<f32>,
}

fn network_id(net: &NetworkConfig) -> String {
    for arch in [
        Architecture::SoundNet8,
        Architecture::SoundNet5,
        Architecture::Autoencoder4,
    ] {
        if net.name == arch.name() && *net == arch.build() {
            return arch.name().to_string();
        }
    }
    format!("{CUSTOM_PREFIX}{}", net.to_text())
}

fn parse_network_id(id: &str) -> Result<NetworkConfig> {
    if let Some(text) = id.strip_prefix(CUSTOM_PREFIX) {
        return NetworkConfig::from_text("custom", text);
    }
    id.parse::<Architecture>()
        .map(Architecture::build)
        .map_err(|_| Error::Malformed(format!("unknown network id `{id}`")))
}

fn blocks(params: &Parameters<f32>) -> Vec<(String, Vec<usize>, &[f32])> {
    let mut out = Vec::new();
    for (name, layer) in &params.layers {
        match layer {
            LayerParams::Conv(p) => {
                out.push((
                    format!("{name}.weight"),
                    vec![p.out_channels, p.in_channels, p.kernel_size],
                    p.weights.as_slice(),
                ));
                out.push((format!("{name}.bias"), vec![p.bias.len()], p.bias.as_slice()));
            }
            LayerParams::BatchNorm(p) => {
                out.push((format!("{name}.gamma"), vec![p.gamma.len()], p.gamma.as_slice()));
                out.push((format!("{name}.beta"), vec![p.beta.len()], p.beta.as_slice()));
                if let Some(r) = &p.running {
                    out.push((format!("{name}.running_mean"), vec![r.mean.len()], r.mean.as_slice()));
                    out.push((format!("{name}.running_var"), vec![r.var.len()], r.var.as_slice()));
                }
            }
        }
    }
    out
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    ck.params.check_against(&ck.network)?;
    let mut w = Writer::default();
    w.bytes(&CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.str(&network_id(&ck.network))?;
    w.u64(ck.meta.iteration);
    w.u64(ck.meta.seed);
    w.f64(ck.meta.loss);
    let blocks = blocks(&ck.params);
    w.len(blocks.len())?;
    for (name, dims, values) in blocks {
        w.str(&name)?;
        w.len(dims.len())?;
        for d in dims {
            w.len(d)?;
        }
        w.f32s(values);
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

fn take_block(blocks: &mut BTreeMap<String, Block>, name: &str, dims: &[usize]) -> Result<Vec<f32>> {
    let block = blocks
        .remove(name)
        .ok_or_else(|| Error::Malformed(format!("missing parameter block `{name}`")))?;
    if block.dims != dims {
        return Err(Error::Malformed(format!(
            "block `{name}` has shape {:?}, expected {dims:?}",
            block.dims
        )));
    }
    Ok(block.values)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 {
        return Err(Error::Malformed("file shorter than the magic number".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < 12 {
        return Err(Error::Malformed("truncated checkpoint header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::BadCrc { stored, computed });
    }
    let mut r = Reader::new(&body[4..]);
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let network = parse_network_id(&r.str("network id")?)?;
    let meta = TrainingMeta {
        iteration: r.u64("iteration")?,
        seed: r.u64("seed")?,
        loss: r.f64("loss")?,
    };
    let count = r.u32("block count")? as usize;
    let mut blocks = BTreeMap::new();
    for _ in 0..count {
        let name = r.str("block name")?;
        let rank = r.u32("block rank")? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32("block dims")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Malformed(format!("block `{name}` size overflows")))?;
        let values = r.f32s(n, "block values")?;
        if blocks.insert(name.clone(), Block { dims, values }).is_some() {
            return Err(Error::Malformed(format!("duplicate block `{name}`")));
        }
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!(
            "{} trailing bytes before the checksum",
            r.remaining()
        )));
    }

    let mut layers = BTreeMap::new();
    for layer in &network.layers {
        let name = &layer.name;
        let conv = |blocks: &mut BTreeMap<String, Block>,
                    out: usize,
                    inp: usize,
                    g: crate::network::ConvGeometry,
                    bias: usize|
         -> Result<LayerParams> {
            let mut p = ConvParams::zeros(out, inp, g.kernel_size, g.stride, g.padding);
            p.weights = take_block(blocks, &format!("{name}.weight"), &[out, inp, g.kernel_size])?;
            p.bias = take_block(blocks, &format!("{name}.bias"), &[bias])?;
            Ok(LayerParams::Conv(p))
        };
        let params = match layer.kind {
            LayerKind::Conv(g) => conv(&mut blocks, g.out_channels, g.in_channels, g, g.out_channels)?,
            LayerKind::TransposedConv(g) => conv(&mut blocks, g.in_channels, g.out_channels, g, g.out_channels)?,
            LayerKind::BatchNorm { channels } => {
                let mut p = BatchNormParams::new(channels);
                p.gamma = take_block(&mut blocks, &format!("{name}.gamma"), &[channels])?;
                p.beta = take_block(&mut blocks, &format!("{name}.beta"), &[channels])?;
                let mean_key = format!("{name}.running_mean");
                if blocks.contains_key(&mean_key) {
                    p.running = Some(RunningStats {
                        mean: take_block(&mut blocks, &mean_key, &[channels])?,
                        var: take_block(&mut blocks, &format!("{name}.running_var"), &[channels])?,
                    });
                }
                LayerParams::BatchNorm(p)
            }
            LayerKind::MaxPool { .. } | LayerKind::Relu => continue,
        };
        layers.insert(name.clone(), params);
    }
    if let Some(extra) = blocks.keys().next() {
        return Err(Error::Malformed(format!("unexpected parameter block `{extra}`")));
    }
    Ok(Checkpoint {
        network,
        params: Parameters {
            seed: meta.seed,
            layers,
        },
        meta,
    })
}

/// Writes atomically via a temp file and rename.
pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ck)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
