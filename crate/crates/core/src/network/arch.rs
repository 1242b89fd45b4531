//! The built-in architectures.
//!
//! Pool strides equal the pool size. Every convolution except the final
//! output convolution is followed by batch norm and ReLU, named
//! `<conv>_bn` and `<conv>_relu`.

use super::{LayerSpec, NetworkConfig};

/// Smallest waveform SoundNet-8 accepts (about 9.5 s at 22,050 Hz).
pub const SOUNDNET8_MIN_INPUT: usize = 209_374;
/// Smallest waveform SoundNet-5 accepts (about 2.6 s at 22,050 Hz).
pub const SOUNDNET5_MIN_INPUT: usize = 56_798;

fn conv_block(layers: &mut Vec<LayerSpec>, name: &str, cin: usize, cout: usize, k: usize, s: usize, p: usize) {
    layers.push(LayerSpec::conv(name, cin, cout, k, s, p));
    layers.push(LayerSpec::batchnorm(&format!("{name}_bn"), cout));
    layers.push(LayerSpec::relu(&format!("{name}_relu")));
}

fn tconv_block(layers: &mut Vec<LayerSpec>, name: &str, cin: usize, cout: usize, k: usize, s: usize, p: usize) {
    layers.push(LayerSpec::transposed_conv(name, cin, cout, k, s, p));
    layers.push(LayerSpec::batchnorm(&format!("{name}_bn"), cout));
    layers.push(LayerSpec::relu(&format!("{name}_relu")));
}

fn taps(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Eight convolutions and three max-pools ending in a 1401-channel output.
pub fn build_soundnet8() -> NetworkConfig {
    let mut l = Vec::new();
    conv_block(&mut l, "conv1", 1, 16, 64, 2, 32);
    l.push(LayerSpec::maxpool("pool1", 8, 8));
    conv_block(&mut l, "conv2", 16, 32, 32, 2, 16);
    l.push(LayerSpec::maxpool("pool2", 8, 8));
    conv_block(&mut l, "conv3", 32, 64, 16, 2, 8);
    conv_block(&mut l, "conv4", 64, 128, 8, 2, 4);
    conv_block(&mut l, "conv5", 128, 256, 4, 2, 2);
    l.push(LayerSpec::maxpool("pool5", 4, 4));
    conv_block(&mut l, "conv6", 256, 512, 4, 2, 2);
    conv_block(&mut l, "conv7", 512, 1024, 4, 2, 2);
    l.push(LayerSpec::conv("conv8", 1024, 1401, 8, 2, 0));
    NetworkConfig::new(
        "soundnet8",
        l,
        taps(&[
            "conv1", "pool1", "conv2", "pool2", "conv3", "conv4", "conv5", "pool5", "conv6", "conv7", "conv8",
        ]),
    )
    .expect("soundnet8 layer list is consistent")
}

/// Five convolutions and three max-pools ending in a 1401-channel output.
pub fn build_soundnet5() -> NetworkConfig {
    let mut l = Vec::new();
    conv_block(&mut l, "conv1", 1, 32, 64, 2, 32);
    l.push(LayerSpec::maxpool("pool1", 8, 8));
    conv_block(&mut l, "conv2", 32, 64, 32, 2, 16);
    l.push(LayerSpec::maxpool("pool2", 8, 8));
    conv_block(&mut l, "conv3", 64, 128, 16, 2, 8);
    l.push(LayerSpec::maxpool("pool3", 8, 8));
    conv_block(&mut l, "conv4", 128, 256, 8, 2, 4);
    l.push(LayerSpec::conv("conv5", 256, 1401, 16, 12, 4));
    NetworkConfig::new(
        "soundnet5",
        l,
        taps(&["conv1", "pool1", "conv2", "pool2", "conv3", "pool3", "conv4", "conv5"]),
    )
    .expect("soundnet5 layer list is consistent")
}

/// Encoder channel widths of the convolutional autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutoencoderWidths(pub [usize; 4]);

impl Default for AutoencoderWidths {
    /// SoundNet-8 conv1..conv4.
    fn default() -> Self {
        Self([16, 32, 64, 128])
    }
}

/// SoundNet-8 conv1..conv4 (with pool1 and pool2) as the encoder, and four
/// transposed convolutions as the decoder.
///
/// Each decoder layer inverts one encoder stage. A stage made of a conv
/// (kernel `k`, stride `s`, padding `p`) followed by a pool of size `P`
/// becomes one transposed conv with kernel `k + (P-1)s`, stride `sP` and
/// padding `p`. The output length equals the input length exactly when
/// `len ≡ 478 (mod 1024)`; see [`AutoencoderWidths`] and
/// [`autoencoder_admissible_length`].
pub fn build_autoencoder4(widths: AutoencoderWidths) -> NetworkConfig {
    let [w1, w2, w3, w4] = widths.0;
    let mut l = Vec::new();
    conv_block(&mut l, "conv1", 1, w1, 64, 2, 32);
    l.push(LayerSpec::maxpool("pool1", 8, 8));
    conv_block(&mut l, "conv2", w1, w2, 32, 2, 16);
    l.push(LayerSpec::maxpool("pool2", 8, 8));
    conv_block(&mut l, "conv3", w2, w3, 16, 2, 8);
    conv_block(&mut l, "conv4", w3, w4, 8, 2, 4);
    tconv_block(&mut l, "deconv4", w4, w3, 8, 2, 4);
    tconv_block(&mut l, "deconv3", w3, w2, 16, 2, 8);
    tconv_block(&mut l, "deconv2", w2, w1, 32 + 7 * 2, 16, 16);
    l.push(LayerSpec::transposed_conv("deconv1", w1, 1, 64 + 7 * 2, 16, 32));
    let name = if widths == AutoencoderWidths::default() {
        "autoencoder4"
    } else {
        "custom"
    };
    NetworkConfig::new(
        name,
        l,
        taps(&[
            "conv1", "pool1", "conv2", "pool2", "conv3", "conv4", "deconv4", "deconv3", "deconv2", "deconv1",
        ]),
    )
    .expect("autoencoder layer list is consistent")
}

/// The built-in network families selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    #[default]
    SoundNet8,
    SoundNet5,
    Autoencoder4,
}

impl Architecture {
    pub fn build(self) -> NetworkConfig {
        match self {
            Self::SoundNet8 => build_soundnet8(),
            Self::SoundNet5 => build_soundnet5(),
            Self::Autoencoder4 => build_autoencoder4(AutoencoderWidths::default()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SoundNet8 => "soundnet8",
            Self::SoundNet5 => "soundnet5",
            Self::Autoencoder4 => "autoencoder4",
        }
    }

    pub fn is_autoencoder(self) -> bool {
        self == Self::Autoencoder4
    }
}

impl std::str::FromStr for Architecture {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "soundnet8" => Ok(Self::SoundNet8),
            "soundnet5" => Ok(Self::SoundNet5),
            "autoencoder4" => Ok(Self::Autoencoder4),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown architecture `{other}` (expected soundnet8, soundnet5 or autoencoder4)"
            ))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Period and offset of the lengths the autoencoder reproduces exactly.
pub(crate) const AUTOENCODER_PERIOD: usize = 1024;
pub(crate) const AUTOENCODER_OFFSET: usize = 478;

/// Smallest length `>= len` that the autoencoder maps back onto itself.
pub fn autoencoder_admissible_length(len: usize) -> usize {
    if len <= AUTOENCODER_OFFSET {
        return AUTOENCODER_OFFSET;
    }
    let m = (len - AUTOENCODER_OFFSET).div_ceil(AUTOENCODER_PERIOD);
    AUTOENCODER_OFFSET + m * AUTOENCODER_PERIOD
}
