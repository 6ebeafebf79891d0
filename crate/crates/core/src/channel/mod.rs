//! Simulated wireless link: latent reals are paired into complex symbols,
//! power-normalized, sent through `y = h·s + n` with block Rayleigh fading or
//! plain AWGN, MMSE-equalized with receiver CSI, and unpaired again.

use num_complex::Complex64;

use crate::error::{Result, ScgirError};
use crate::numeric::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Awgn,
    Rayleigh,
}

impl ChannelModel {
    pub fn name(self) -> &'static str {
        match self {
            ChannelModel::Awgn => "awgn",
            ChannelModel::Rayleigh => "rayleigh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelModel::Awgn),
            "rayleigh" => Ok(ChannelModel::Rayleigh),
            other => Err(ScgirError::Config(format!("unknown channel model {other:?}"))),
        }
    }
}

/// Noise variance for a target SNR under unit signal power.
pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn snr_db_from_noise_var(noise_var: f64) -> f64 {
    -10.0 * noise_var.log10()
}

/// One block-fading draw: gain `h` and noise variance for a single latent vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub noise_var: f64,
    pub snr_db: f64,
    pub model: ChannelModel,
}

impl ChannelRealization {
    pub fn awgn(snr_db: f64) -> Self {
        ChannelRealization {
            h: Complex64::new(1.0, 0.0),
            noise_var: noise_var_from_snr_db(snr_db),
            snr_db,
            model: ChannelModel::Awgn,
        }
    }

    /// Fixed gain and noise variance (for tests and known-channel studies).
    pub fn fixed(h: Complex64, noise_var: f64, model: ChannelModel) -> Self {
        ChannelRealization {
            h,
            noise_var,
            snr_db: snr_db_from_noise_var(noise_var),
            model,
        }
    }
}

/// `h ~ CN(0, 1)`: real and imaginary parts i.i.d. `N(0, 1/2)`.
pub fn rayleigh_draw(snr_db: f64, rng: &mut Rng) -> ChannelRealization {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ChannelRealization {
        h: Complex64::new(s * rng.normal(), s * rng.normal()),
        noise_var: noise_var_from_snr_db(snr_db),
        snr_db,
        model: ChannelModel::Rayleigh,
    }
}

/// Channel model plus operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub noise_var: f64,
}

impl ChannelConfig {
    pub fn from_snr_db(model: ChannelModel, snr_db: f64) -> Self {
        ChannelConfig {
            model,
            noise_var: noise_var_from_snr_db(snr_db),
        }
    }

    pub fn from_noise_var(model: ChannelModel, noise_var: f64) -> Self {
        ChannelConfig { model, noise_var }
    }

    pub fn snr_db(&self) -> f64 {
        snr_db_from_noise_var(self.noise_var)
    }

    /// Fresh realization for one latent vector.
    pub fn draw(&self, rng: &mut Rng) -> ChannelRealization {
        match self.model {
            ChannelModel::Awgn => ChannelRealization::fixed(Complex64::new(1.0, 0.0), self.noise_var, ChannelModel::Awgn),
            ChannelModel::Rayleigh => {
                let mut r = rayleigh_draw(self.snr_db(), rng);
                r.noise_var = self.noise_var;
                r
            }
        }
    }
}

/// Bandwidth settings of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// `k/n` in `(0, 1]`.
    pub compression_ratio: f64,
    /// Source dimension `n` (the latent length).
    pub source_dims: usize,
    /// Receiver knows `h`.
    pub csi: bool,
    /// Feed MMSE-equalized symbols downstream; otherwise the raw received ones.
    pub equalize: bool,
}

impl LinkConfig {
    pub fn new(compression_ratio: f64, source_dims: usize) -> Self {
        LinkConfig {
            compression_ratio,
            source_dims,
            csi: true,
            equalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.compression_ratio > 0.0 && self.compression_ratio <= 1.0) {
            return Err(ScgirError::Config(format!(
                "compression ratio {} not in (0, 1]",
                self.compression_ratio
            )));
        }
        if self.source_dims < 2 {
            return Err(ScgirError::Config(format!("source dims {} < 2", self.source_dims)));
        }
        Ok(())
    }

    /// Complex symbols sent: `max(1, floor(ratio · n / 2))`.
    pub fn kept_symbols(&self) -> usize {
        ((self.compression_ratio * self.source_dims as f64 / 2.0).floor() as usize).max(1)
    }
}

/// Complex symbols plus the gain applied to reach unit average power.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub symbols: Vec<Complex64>,
    pub gain: f64,
}

impl SymbolBlock {
    pub fn avg_power(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

/// Pairs the first `2k` reals of `z` as I/Q and normalizes to unit average power.
pub fn to_symbols(z: &[f64], link: &LinkConfig) -> Result<SymbolBlock> {
    link.validate()?;
    if z.len() < 2 {
        return Err(ScgirError::Data(format!("latent length {} < 2", z.len())));
    }
    let k = link.kept_symbols();
    if 2 * k > z.len() {
        return Err(ScgirError::Data(format!("{k} symbols need {} reals, latent has {}", 2 * k, z.len())));
    }
    let raw: Vec<Complex64> = z[..2 * k].chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    let power = raw.iter().map(|s| s.norm_sqr()).sum::<f64>() / k as f64;
    if !(power > 0.0 && power.is_finite()) {
        return Err(ScgirError::Data("kept latent has zero or non-finite power".into()));
    }
    let gain = 1.0 / power.sqrt();
    Ok(SymbolBlock {
        symbols: raw.into_iter().map(|s| s * gain).collect(),
        gain,
    })
}

/// `y = h·s + n`, `n ~ CN(0, noise_var)` i.i.d. per symbol.
pub fn transmit(s: &SymbolBlock, ch: &ChannelRealization, rng: &mut Rng) -> SymbolBlock {
    let sd = (ch.noise_var / 2.0).sqrt();
    let symbols = s
        .symbols
        .iter()
        .map(|&x| {
            let n = if sd > 0.0 {
                Complex64::new(sd * rng.normal(), sd * rng.normal())
            } else {
                Complex64::new(0.0, 0.0)
            };
            ch.h * x + n
        })
        .collect();
    SymbolBlock { symbols, gain: s.gain }
}

/// MMSE scaling `h* y / (|h|² + σ²)` using perfect receiver CSI.
pub fn equalize(y: &SymbolBlock, ch: &ChannelRealization, link: &LinkConfig) -> Result<SymbolBlock> {
    if !link.csi {
        return Err(ScgirError::Unsupported("equalization without receiver CSI".into()));
    }
    let denom = ch.h.norm_sqr() + ch.noise_var;
    if denom == 0.0 {
        return Err(ScgirError::Data("channel gain and noise are both zero".into()));
    }
    let w = ch.h.conj() / denom;
    Ok(SymbolBlock {
        symbols: y.symbols.iter().map(|&v| w * v).collect(),
        gain: y.gain,
    })
}

/// Unpairs symbols, undoes the power normalization and zero-fills to `original_d`.
pub fn from_symbols(s: &SymbolBlock, link: &LinkConfig, original_d: usize) -> Result<Vec<f64>> {
    let k = link.kept_symbols();
    if s.symbols.len() != k || 2 * k > original_d {
        return Err(ScgirError::Data(format!(
            "{} symbols do not fit link with {k} symbols and {original_d} dims",
            s.symbols.len()
        )));
    }
    let mut out = vec![0.0; original_d];
    for (i, sym) in s.symbols.iter().enumerate() {
        out[2 * i] = sym.re / s.gain;
        out[2 * i + 1] = sym.im / s.gain;
    }
    Ok(out)
}

/// Full chain for one latent vector with a fresh channel draw.
pub fn simulate_link(z: &[f64], link: &LinkConfig, ch: &ChannelConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let block = to_symbols(z, link)?;
    let realization = ch.draw(rng);
    let y = transmit(&block, &realization, rng);
    let rx = if link.equalize {
        equalize(&y, &realization, link)?
    } else {
        y
    };
    from_symbols(&rx, link, z.len())
}

/// Row-wise [`simulate_link`]; each row sees its own fading draw.
pub fn simulate_batch(z: &Tensor, link: &LinkConfig, ch: &ChannelConfig, rng: &mut Rng) -> Result<Tensor> {
    let (n, d) = (z.rows(), z.cols());
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(simulate_link(z.row(i), link, ch, rng)?);
    }
    Tensor::new(vec![n, d], out)
}
