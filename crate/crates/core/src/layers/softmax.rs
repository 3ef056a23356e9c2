use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::Params;

/// Affine classifier with fused softmax cross-entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxHead {
    /// `[classes × in]`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug)]
pub struct SoftmaxOutput {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub probs: Tensor,
    /// Number of rows whose arg-max matches the label.
    pub correct: usize,
    pub d_input: Tensor,
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

impl SoftmaxHead {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let &[classes, _] = weight.shape() else {
            return Err(Error::InvalidLayer(format!(
                "head weight must be a matrix, got {:?}",
                weight.shape()
            )));
        };
        if bias.shape() != [classes] {
            return Err(Error::shape("head bias", weight.shape(), bias.shape()));
        }
        Ok(SoftmaxHead { weight, bias })
    }

    pub fn zeros(inputs: usize, classes: usize) -> Self {
        SoftmaxHead {
            weight: Tensor::zeros(&[classes, inputs]),
            bias: Tensor::zeros(&[classes]),
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.inputs() {
            return Err(Error::shape("softmax_head", x.shape(), self.weight.shape()));
        }
        x.matmul_nt(&self.weight)?.add_row_vector(&self.bias)
    }

    /// Row-wise softmax probabilities.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let mut z = self.logits(x)?;
        let classes = self.classes();
        for r in 0..z.rows() {
            softmax_in_place(&mut z.data_mut()[r * classes..(r + 1) * classes]);
        }
        Ok(z)
    }

    /// Forward and backward in one pass: mean cross-entropy and its gradient
    /// `(p − onehot)/batch` pushed back through the affine map.
    pub fn loss_and_grad(&self, x: &Tensor, labels: &[usize]) -> Result<SoftmaxOutput> {
        let batch = x.rows();
        if labels.len() != batch {
            return Err(Error::shape("softmax labels", x.shape(), &[labels.len()]));
        }
        let classes = self.classes();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let mut probs = self.logits(x)?;
        let mut loss = 0.0;
        let mut correct = 0;
        let scale = if batch > 0 { 1.0 / batch as f64 } else { 0.0 };
        for (r, &label) in labels.iter().enumerate() {
            let row = &mut probs.data_mut()[r * classes..(r + 1) * classes];
            let argmax = (0..classes).fold(0, |best, i| if row[i] > row[best] { i } else { best });
            if argmax == label {
                correct += 1;
            }
            let target = row[label];
            loss += softmax_in_place(row) - target;
        }
        let mut d_logits = probs.clone();
        for (r, &label) in labels.iter().enumerate() {
            let d = d_logits.row_mut(r);
            d[label] -= 1.0;
            for v in d.iter_mut() {
                *v *= scale;
            }
        }
        Ok(SoftmaxOutput {
            loss: loss * scale,
            probs,
            correct,
            d_input: d_logits.matmul(&self.weight)?,
            d_weight: d_logits.matmul_tn(x)?,
            d_bias: d_logits.sum_rows(),
        })
    }
}

/// Replaces logits with probabilities and returns `max + ln Σ exp(z − max)`.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

impl Params for SoftmaxHead {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn identity_head(n: usize) -> SoftmaxHead {
        SoftmaxHead::new(Tensor::identity(n), Tensor::zeros(&[n])).unwrap()
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let head = identity_head(10);
        let out = head.loss_and_grad(&Tensor::filled(&[3, 10], 0.7), &[0, 4, 9]).unwrap();
        assert!((out.loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_do_not_overflow() {
        let head = identity_head(2);
        let x = Tensor::from_rows(&[&[1e3, 0.0]]).unwrap();
        let out = head.loss_and_grad(&x, &[0]).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert!(out.d_input.all_finite());
        let wrong = head.loss_and_grad(&x, &[1]).unwrap();
        assert!(wrong.loss.is_finite() && wrong.loss > 700.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = Rng::new(8);
        let head = SoftmaxHead::new(rng.normal_tensor(&[7, 4], 3.0), rng.normal_tensor(&[7], 1.0)).unwrap();
        let p = head.probabilities(&rng.normal_tensor(&[5, 4], 2.0)).unwrap();
        for r in 0..5 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_out_of_range() {
        let head = identity_head(3);
        let err = head.loss_and_grad(&Tensor::zeros(&[1, 3]), &[3]).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 3, classes: 3 }));
    }
}
