use crate::error::{Result, ScgirError};
use crate::numeric::{batch_standardize, column_moments, GradTape, Tensor, Var};

/// Encoder outputs for a batch; `standardized` marks column-standardized values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub values: Tensor,
    pub standardized: bool,
}

impl LatentBatch {
    pub fn raw(values: Tensor) -> Self {
        LatentBatch {
            values,
            standardized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn standardize(&self, eps: f64) -> Result<LatentBatch> {
        Ok(LatentBatch {
            values: batch_standardize(&self.values, eps)?,
            standardized: true,
        })
    }

    /// Multiplies every entry by `s`; clears the standardized flag.
    pub fn scaled(&self, s: f64) -> LatentBatch {
        LatentBatch::raw(self.values.map(|v| v * s))
    }
}

/// Empirical cross-correlation `z1ᵀ z2 / n` of standardized latents.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrMatrix {
    pub values: Tensor,
}

impl CrossCorrMatrix {
    pub fn new(values: Tensor) -> Result<Self> {
        match values.shape() {
            &[r, c] if r == c => Ok(CrossCorrMatrix { values }),
            s => Err(ScgirError::shape("cross-correlation", s, s)),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn diag_mean(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.values.at(i, i)).sum::<f64>() / d as f64
    }

    pub fn diag_abs_dev_mean(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| (self.values.at(i, i) - 1.0).abs()).sum::<f64>() / d as f64
    }

    pub fn offdiag_abs_mean(&self) -> f64 {
        let d = self.dim();
        if d < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += self.values.at(i, j).abs();
                }
            }
        }
        s / (d * (d - 1)) as f64
    }

    pub fn transpose(&self) -> CrossCorrMatrix {
        CrossCorrMatrix {
            values: self.values.transpose().expect("square"),
        }
    }
}

/// The two terms of the redundancy-reduction loss and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgirLossParts {
    /// `Σ_i (1 - C_ii)²`
    pub on_diag: f64,
    /// `Σ_i Σ_{j≠i} C_ij²`
    pub off_diag: f64,
    pub lambda: f64,
    pub total: f64,
}

pub fn cross_correlation(z1: &LatentBatch, z2: &LatentBatch) -> Result<CrossCorrMatrix> {
    if !z1.standardized || !z2.standardized {
        return Err(ScgirError::Contract("cross_correlation needs standardized latents".into()));
    }
    if z1.values.shape() != z2.values.shape() {
        return Err(ScgirError::shape("cross_correlation", z1.values.shape(), z2.values.shape()));
    }
    let n = z1.n() as f64;
    let c = z1.values.transpose()?.matmul(&z2.values)?.map(|v| v / n);
    CrossCorrMatrix::new(c)
}

pub fn scgir_loss(c: &CrossCorrMatrix, lambda: f64) -> ScgirLossParts {
    let d = c.dim();
    let mut on_diag = 0.0;
    let mut off_diag = 0.0;
    for i in 0..d {
        for j in 0..d {
            let v = c.values.at(i, j);
            if i == j {
                on_diag += (1.0 - v) * (1.0 - v);
            } else {
                off_diag += v * v;
            }
        }
    }
    ScgirLossParts {
        on_diag,
        off_diag,
        lambda,
        total: on_diag + lambda * off_diag,
    }
}

/// Sample covariance `(1/(K-1)) Σ (s_i - s̄)(s_i - s̄)ᵀ` of the rows of `s`.
pub fn covariance(s: &Tensor) -> Result<Tensor> {
    if s.shape().len() != 2 {
        return Err(ScgirError::shape("covariance", s.shape(), &[0, 0]));
    }
    let (k, d) = (s.rows(), s.cols());
    if k < 2 {
        return Err(ScgirError::BatchTooSmall { needed: 2, got: k });
    }
    let (mean, _) = column_moments(s)?;
    let mut out = Tensor::zeros(&[d, d]);
    for r in 0..k {
        let row = s.row(r);
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..d {
                out.data_mut()[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    Ok(out.map(|v| v / (k - 1) as f64))
}

/// `a·b / (‖a‖‖b‖)`; defined as 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_similarity length mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean row-wise cosine similarity of two equally shaped matrices.
pub fn mean_row_cosine(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.rows();
    (0..n).map(|i| cosine_similarity(a.row(i), b.row(i))).sum::<f64>() / n as f64
}

/// Handles to the differentiable loss graph built by [`scgir_graph`].
#[derive(Debug, Clone, Copy)]
pub struct LossGraph {
    pub total: Var,
    pub on_diag: Var,
    pub off_diag: Var,
    pub cross_corr: Var,
    pub std1: Var,
    pub std2: Var,
}

/// Records standardization, cross-correlation and the weighted loss on `tape`.
pub fn scgir_graph(tape: &mut GradTape, z1: Var, z2: Var, lambda: f64, eps: f64) -> Result<LossGraph> {
    let std1 = tape.standardize(z1, eps)?;
    let std2 = tape.standardize(z2, eps)?;
    let n = tape.value(std1).rows() as f64;
    let d = tape.value(std1).cols();
    let t1 = tape.transpose(std1)?;
    let prod = tape.matmul(t1, std2)?;
    let cross_corr = tape.scale(prod, 1.0 / n);
    let diag = tape.diag(cross_corr)?;
    let neg = tape.scale(diag, -1.0);
    let dev = tape.add_scalar(neg, 1.0);
    let dev_sq = tape.square(dev);
    let on_diag = tape.sum(dev_sq);
    let mut mask = Tensor::full(&[d, d], 1.0);
    for i in 0..d {
        mask.data_mut()[i * d + i] = 0.0;
    }
    let mask = tape.leaf(mask);
    let off = tape.mul(cross_corr, mask)?;
    let off_sq = tape.square(off);
    let off_diag = tape.sum(off_sq);
    let weighted = tape.scale(off_diag, lambda);
    let total = tape.add(on_diag, weighted)?;
    Ok(LossGraph {
        total,
        on_diag,
        off_diag,
        cross_corr,
        std1,
        std2,
    })
}
