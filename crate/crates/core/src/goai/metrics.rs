use std::collections::BTreeSet;

use crate::error::{Result, ScgirError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Unweighted mean over every class present in predictions or labels.
    Macro,
    /// Pooled counts; equals accuracy for single-label data.
    Micro,
}

fn check(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(ScgirError::shape("metric", &[preds.len()], &[labels.len()]));
    }
    if preds.is_empty() {
        return Err(ScgirError::Data("metric over zero samples".into()));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

pub fn f1_score(preds: &[usize], labels: &[usize], averaging: Averaging) -> Result<f64> {
    check(preds, labels)?;
    match averaging {
        Averaging::Micro => accuracy(preds, labels),
        Averaging::Macro => {
            let classes: BTreeSet<usize> = preds.iter().chain(labels).copied().collect();
            let mut sum = 0.0;
            for &c in &classes {
                let mut tp = 0usize;
                let mut fp = 0usize;
                let mut fneg = 0usize;
                for (&p, &l) in preds.iter().zip(labels) {
                    match (p == c, l == c) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fneg += 1,
                        _ => {}
                    }
                }
                let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
                let recall = if tp + fneg > 0 { tp as f64 / (tp + fneg) as f64 } else { 0.0 };
                if precision + recall > 0.0 {
                    sum += 2.0 * precision * recall / (precision + recall);
                }
            }
            Ok(sum / classes.len() as f64)
        }
    }
}
