use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Adam with bias correction. Each parameter slot carries its own learning
/// rate so that one optimizer can drive parameter groups trained at
/// different rates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone)]
struct Slot {
    lr: f64,
    first: DenseMatrix,
    second: DenseMatrix,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            step: 0,
            slots: Vec::new(),
        }
    }

    /// Registers a parameter of the given shape; returns its slot index.
    pub fn add_slot(&mut self, shape: (usize, usize), lr: f64) -> usize {
        self.slots.push(Slot {
            lr,
            first: DenseMatrix::zeros(shape.0, shape.1),
            second: DenseMatrix::zeros(shape.0, shape.1),
        });
        self.slots.len() - 1
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// One joint update. `grads[k] == None` leaves slot `k` (parameter and
    /// moments) untouched, which is how frozen groups are excluded.
    pub fn update(&mut self, params: &mut [&mut DenseMatrix], grads: &[Option<&DenseMatrix>]) -> Result<()> {
        if params.len() != self.slots.len() || grads.len() != self.slots.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: (self.slots.len(), 1),
                right: (params.len(), grads.len()),
            });
        }
        for (k, p) in params.iter().enumerate() {
            if p.shape() != self.slots[k].first.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    left: self.slots[k].first.shape(),
                    right: p.shape(),
                });
            }
            if let Some(g) = grads[k] {
                if g.shape() != p.shape() {
                    return Err(Error::Dimension {
                        op: "adam_step",
                        left: p.shape(),
                        right: g.shape(),
                    });
                }
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);

        for ((slot, p), g) in self.slots.iter_mut().zip(params.iter_mut()).zip(grads) {
            let Some(g) = g else { continue };
            let lr = slot.lr;
            let m = slot.first.as_mut_slice();
            let v = slot.second.as_mut_slice();
            for (((pi, gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
