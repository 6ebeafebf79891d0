use sha2::{Digest, Sha256};

use super::loss::LatentBatch;
use crate::augment::ImageBatch;
use crate::error::{Result, ScgirError};
use crate::numeric::{BatchStats, BoundParams, Dense, GradTape, Mode, ParamId, ParamStore, Rng, Standardizer, Var, STANDARDIZE_EPS};

/// Shape of the semantic encoder.
///
/// The backbone is a stack of 3×3 stride-2 convolutions with GELU followed by
/// global average pooling; with no conv blocks the pixels are flattened
/// instead. The projection head is `Dense -> GELU -> standardize` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv_channels: Vec<usize>,
    pub head_dims: Vec<usize>,
    /// Shared weights for both views; `false` gives each view its own branch.
    pub tied: bool,
}

impl EncoderConfig {
    pub fn desk_default(in_channels: usize, height: usize, width: usize) -> Self {
        EncoderConfig {
            in_channels,
            height,
            width,
            conv_channels: vec![8, 16, 32],
            head_dims: vec![64, 128, 256],
            tied: true,
        }
    }

    pub fn latent_dim(&self) -> usize {
        *self.head_dims.last().expect("validated config has a head")
    }

    pub fn backbone_dim(&self) -> usize {
        self.conv_channels
            .last()
            .copied()
            .unwrap_or(self.in_channels * self.height * self.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_dims.is_empty() || self.head_dims.contains(&0) {
            return Err(ScgirError::Config("encoder head needs at least one nonzero layer".into()));
        }
        if self.conv_channels.contains(&0) || self.in_channels == 0 || self.height == 0 || self.width == 0 {
            return Err(ScgirError::Config("encoder dims must be nonzero".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` description; the digest is taken over this text.
    pub fn describe(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "model = encoder\ninput = {}x{}x{}\nconv_channels = {}\nhead_dims = {}\ntied = {}\n",
            self.in_channels,
            self.height,
            self.width,
            join(&self.conv_channels),
            join(&self.head_dims),
            self.tied
        )
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.describe().as_bytes()).into()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvBlock {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct Branch {
    convs: Vec<ConvBlock>,
    head: Vec<(Dense, Standardizer)>,
}

/// Backbone plus projection head with its parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    config: EncoderConfig,
    store: ParamStore,
    branches: Vec<Branch>,
}

impl EncoderModel {
    pub fn new(config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let n_branches = if config.tied { 1 } else { 2 };
        let mut branches = Vec::with_capacity(n_branches);
        for b in 0..n_branches {
            let mut convs = Vec::new();
            let mut c_in = config.in_channels;
            for (i, &c_out) in config.conv_channels.iter().enumerate() {
                let fan_in = c_in * 9;
                convs.push(ConvBlock {
                    weight: store.add_kaiming(format!("b{b}.conv{i}.weight"), &[c_out, c_in, 3, 3], fan_in, rng),
                    bias: store.add(format!("b{b}.conv{i}.bias"), crate::numeric::Tensor::zeros(&[c_out])),
                });
                c_in = c_out;
            }
            let mut head = Vec::new();
            let mut d_in = config.backbone_dim();
            for (i, &d_out) in config.head_dims.iter().enumerate() {
                let dense = Dense::new(&mut store, &format!("b{b}.head{i}"), d_in, d_out, rng);
                let std = Standardizer::new(&mut store, &format!("b{b}.head{i}.std"), d_out, STANDARDIZE_EPS);
                head.push((dense, std));
                d_in = d_out;
            }
            branches.push(Branch { convs, head });
        }
        Ok(EncoderModel {
            config,
            store,
            branches,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Records the forward pass of `branch` on `tape`. Returns the latent
    /// handle and, in training mode, the standardization statistics observed.
    pub fn forward_on_tape(
        &self,
        tape: &mut GradTape,
        params: &BoundParams,
        x: &ImageBatch,
        branch: usize,
        mode: Mode,
    ) -> Result<(Var, Vec<BatchStats>)> {
        let cfg = &self.config;
        if (x.c, x.h, x.w) != (cfg.in_channels, cfg.height, cfg.width) {
            return Err(ScgirError::shape(
                "encoder forward",
                &[x.c, x.h, x.w],
                &[cfg.in_channels, cfg.height, cfg.width],
            ));
        }
        let branch = &self.branches[branch.min(self.branches.len() - 1)];
        let mut h = tape.leaf(x.to_tensor());
        if branch.convs.is_empty() {
            h = tape.reshape(h, &[x.n, x.image_len()])?;
        } else {
            for conv in &branch.convs {
                h = tape.conv2d(h, params.var(conv.weight), params.var(conv.bias), 2, 1)?;
                h = tape.gelu(h);
            }
            h = tape.global_avg_pool(h)?;
        }
        let mut stats = Vec::new();
        for (dense, std) in &branch.head {
            h = dense.forward(tape, params, h)?;
            h = tape.gelu(h);
            let (out, s) = std.forward(tape, &self.store, h, mode)?;
            h = out;
            stats.extend(s);
        }
        Ok((h, stats))
    }

    /// Inference-mode latents (running statistics, no augmentation).
    pub fn forward(&self, x: &ImageBatch) -> Result<LatentBatch> {
        self.forward_mode(x, Mode::Eval)
    }

    /// Latents using the given standardization mode; never updates running stats.
    pub fn forward_mode(&self, x: &ImageBatch, mode: Mode) -> Result<LatentBatch> {
        let mut tape = GradTape::new();
        let params = self.store.bind(&mut tape);
        let (z, _) = self.forward_on_tape(&mut tape, &params, x, 0, mode)?;
        Ok(LatentBatch::raw(tape.value(z).clone()))
    }

    /// Eval-mode latents computed in chunks of `chunk` images.
    pub fn encode_all(&self, x: &ImageBatch, chunk: usize) -> Result<crate::numeric::Tensor> {
        let d = self.config.latent_dim();
        let mut data = Vec::with_capacity(x.n * d);
        let idx: Vec<usize> = (0..x.n).collect();
        for part in idx.chunks(chunk.max(1)) {
            data.extend_from_slice(self.forward(&x.gather(part))?.values.data());
        }
        crate::numeric::Tensor::new(vec![x.n, d], data)
    }

    pub fn apply_stats(&mut self, stats: &[BatchStats]) {
        for s in stats {
            s.apply(&mut self.store);
        }
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub(crate) fn replace_store(&mut self, store: ParamStore) -> Result<()> {
        if store.len() != self.store.len()
            || store
                .entries()
                .iter()
                .zip(self.store.entries())
                .any(|(a, b)| a.name != b.name || a.value.shape() != b.value.shape())
        {
            return Err(ScgirError::Data("checkpoint layout does not match model".into()));
        }
        self.store = store;
        Ok(())
    }
}
