use num_complex::Complex64;
use scgir_core::channel::{
    equalize, from_symbols, rayleigh_draw, to_symbols, transmit, ChannelModel, ChannelRealization, LinkConfig,
};
use scgir_core::numeric::Rng;

use super::ks_test;

pub const SNR_TARGETS: [f64; 5] = [0.0, 5.0, 10.0, 20.0, 30.0];
pub const SYMBOLS: usize = 100_000;

/// Measured SNR in dB of one AWGN pass over `SYMBOLS` unit-power symbols.
pub fn empirical_snr_db(target_db: f64, rng: &mut Rng) -> f64 {
    let z: Vec<f64> = (0..2 * SYMBOLS).map(|_| rng.normal() * 3.0 + 0.5).collect();
    let link = LinkConfig::new(1.0, z.len());
    let s = to_symbols(&z, &link).expect("symbols");
    let ch = ChannelRealization::awgn(target_db);
    let y = transmit(&s, &ch, rng);
    let noise = y.symbols.iter().zip(&s.symbols).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / SYMBOLS as f64;
    10.0 * (s.avg_power() / noise).log10()
}

/// `(E|h|², KS p-value of |h| against 1 - exp(-r²))` over `SYMBOLS` draws.
pub fn rayleigh_gain_stats(rng: &mut Rng) -> (f64, f64) {
    let mags: Vec<f64> = (0..SYMBOLS).map(|_| rayleigh_draw(10.0, rng).h.norm()).collect();
    let power = mags.iter().map(|m| m * m).sum::<f64>() / SYMBOLS as f64;
    let (_, p) = ks_test(&mags, |r| 1.0 - (-r * r).exp());
    (power, p)
}

/// Worst absolute error of the noiseless equalized chain over random latents and gains.
pub fn noiseless_roundtrip_err(trials: usize, rng: &mut Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = 2 + rng.below(63);
        let z: Vec<f64> = (0..d).map(|_| rng.normal() * 4.0).collect();
        let link = LinkConfig::new(1.0, d);
        let h = loop {
            let h = Complex64::new(rng.normal(), rng.normal()) * std::f64::consts::FRAC_1_SQRT_2;
            if h.norm() > 1e-3 {
                break h;
            }
        };
        let ch = ChannelRealization::fixed(h, 0.0, ChannelModel::Rayleigh);
        let s = to_symbols(&z, &link).expect("symbols");
        let y = transmit(&s, &ch, rng);
        let back = from_symbols(&equalize(&y, &ch, &link).expect("csi"), &link, d).expect("unpair");
        let kept = 2 * link.kept_symbols();
        for i in 0..d {
            let expect = if i < kept { z[i] } else { 0.0 };
            worst = worst.max((back[i] - expect).abs());
        }
    }
    worst
}
