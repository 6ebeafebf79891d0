use crate::error::{Result, ScgirError};
use crate::numeric::Tensor;

/// Integer class labels over `classes` classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelBatch {
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabelBatch {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(ScgirError::Data(format!("label {bad} outside 0..{classes}")));
        }
        Ok(LabelBatch { labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn gather(&self, indices: &[usize]) -> LabelBatch {
        LabelBatch {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn one_hot(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.labels.len(), self.classes]);
        for (i, &l) in self.labels.iter().enumerate() {
            t.data_mut()[i * self.classes + l] = 1.0;
        }
        t
    }
}
