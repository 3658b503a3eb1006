use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

/// Trainable matrix with an optional accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Option<Matrix<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Matrix<T>) -> Self {
        Self {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn accumulate_grad(&mut self, g: &Matrix<T>) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::shape(format!(
                "gradient {:?} for parameter `{}` of shape {:?}",
                g.shape(),
                self.name,
                self.value.shape()
            )));
        }
        match &mut self.grad {
            Some(acc) => acc.add_assign(g)?,
            None => self.grad = Some(g.clone()),
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Adagrad,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-10;

/// One Adagrad update over flat buffers: `acc += g^2; theta -= lr g / (sqrt(acc) + eps)`.
#[inline]
pub fn adagrad_update<T: Scalar>(theta: &mut [T], grad: &[T], acc: &mut [T], lr: T, eps: T) {
    for ((p, &g), a) in theta.iter_mut().zip(grad).zip(acc.iter_mut()) {
        *a += g * g;
        *p -= lr * g / (a.sqrt() + eps);
    }
}

/// SGD, Adam or Adagrad state for a fixed, ordered list of parameters.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    learning_rate: T,
    step: u64,
    // Adam: (first moment, second moment); Adagrad: (accumulator, unused)
    buffers: Vec<(Matrix<T>, Matrix<T>)>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate: T::lit(learning_rate),
            step: 0,
            buffers: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter, then clears their gradients.
    ///
    /// The parameter list must keep the same order and shapes across calls.
    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) -> Result<()> {
        if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
            return Err(Error::MissingGrad(p.name.clone()));
        }
        if self.buffers.is_empty() {
            self.buffers = params
                .iter()
                .map(|p| {
                    let (r, c) = p.value.shape();
                    (Matrix::zeros(r, c), Matrix::zeros(r, c))
                })
                .collect();
        }
        if self.buffers.len() != params.len()
            || self
                .buffers
                .iter()
                .zip(params.iter())
                .any(|(b, p)| b.0.shape() != p.value.shape())
        {
            return Err(Error::shape(
                "optimizer parameter list changed between steps",
            ));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    let g = p.grad.take().expect("checked above");
                    for (x, &d) in p.value.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerKind::Adagrad => {
                let eps = T::lit(ADAGRAD_EPS);
                for (p, (acc, _)) in params.iter_mut().zip(&mut self.buffers) {
                    let g = p.grad.take().expect("checked above");
                    adagrad_update(p.value.as_mut_slice(), g.as_slice(), acc.as_mut_slice(), lr, eps);
                }
            }
            OptimizerKind::Adam => {
                let b1 = T::lit(ADAM_BETA1);
                let b2 = T::lit(ADAM_BETA2);
                let eps = T::lit(ADAM_EPS);
                let t = self.step as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (p, (m, v)) in params.iter_mut().zip(&mut self.buffers) {
                    let g = p.grad.take().expect("checked above");
                    for (((x, &d), mi), vi) in p
                        .value
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice())
                    {
                        *mi = b1 * *mi + (T::one() - b1) * d;
                        *vi = b2 * *vi + (T::one() - b2) * d * d;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
