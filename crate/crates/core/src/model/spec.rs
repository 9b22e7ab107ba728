use serde::{Deserialize, Serialize};

use super::ModelError;

/// One encoder stage: a strided depthwise-separable block followed by
/// `blocks - 1` residual stride-1 blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderStage {
    pub out_channels: usize,
    pub stride: usize,
    pub blocks: usize,
}

/// Network topology. Decoder stage `i` merges the skip from encoder stage
/// `n - 2 - i` (the last one merges the raw input) and emits `decoder[i]` channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_channels: usize,
    pub encoder: Vec<EncoderStage>,
    pub decoder: Vec<usize>,
}

impl Default for ModelSpec {
    /// Four stride-2 stages at 16/24/40/64 channels; each decoder stage emits the
    /// width of the skip it merges, with 8 channels at full resolution.
    fn default() -> Self {
        let stage = |out_channels| EncoderStage { out_channels, stride: 2, blocks: 1 };
        Self {
            input_channels: 1,
            encoder: vec![stage(16), stage(24), stage(40), stage(64)],
            decoder: vec![40, 24, 16, 8],
        }
    }
}

impl ModelSpec {
    /// Reduced-width variant used for quick experiments.
    pub fn compact() -> Self {
        let stage = |out_channels| EncoderStage { out_channels, stride: 2, blocks: 1 };
        Self {
            input_channels: 1,
            encoder: vec![stage(8), stage(12), stage(16), stage(24)],
            decoder: vec![16, 12, 8, 4],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |msg: String| Err(ModelError::InvalidSpec(msg));
        if self.input_channels == 0 {
            return invalid("input_channels must be >= 1".into());
        }
        if self.encoder.is_empty() {
            return invalid("encoder needs at least one stage".into());
        }
        if self.encoder.len() != self.decoder.len() {
            return invalid(format!(
                "encoder has {} stages but decoder has {}",
                self.encoder.len(),
                self.decoder.len()
            ));
        }
        for (i, st) in self.encoder.iter().enumerate() {
            if st.out_channels == 0 || st.blocks == 0 {
                return invalid(format!("encoder stage {i} has zero channels or blocks"));
            }
            if st.stride != 1 && st.stride != 2 {
                return invalid(format!("encoder stage {i} stride {} not in {{1, 2}}", st.stride));
            }
        }
        if let Some(i) = self.decoder.iter().position(|&c| c == 0) {
            return invalid(format!("decoder stage {i} has zero channels"));
        }
        Ok(())
    }

    /// Input height and width must be multiples of this.
    pub fn required_multiple(&self) -> usize {
        self.encoder.iter().map(|s| s.stride).product()
    }

    /// Channel count entering encoder stage `i`.
    pub(crate) fn stage_in_channels(&self, i: usize) -> usize {
        if i == 0 {
            self.input_channels
        } else {
            self.encoder[i - 1].out_channels
        }
    }

    /// Channels of the skip tensor merged by decoder stage `i`.
    pub(crate) fn skip_channels(&self, i: usize) -> usize {
        let n = self.encoder.len();
        if i + 1 == n {
            self.input_channels
        } else {
            self.encoder[n - 2 - i].out_channels
        }
    }

    /// Channels entering decoder stage `i` before the skip is appended.
    pub(crate) fn decoder_in_channels(&self, i: usize) -> usize {
        if i == 0 {
            self.encoder.last().map_or(0, |s| s.out_channels)
        } else {
            self.decoder[i - 1]
        }
    }
}
