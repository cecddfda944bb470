//! Single-hidden-layer ReLU network with a linear output per action.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PARAM_HEADER: &str = "agvsb-qnet v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// Row-major `hidden x inputs`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// Row-major `outputs x hidden`.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Hidden activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub q: Vec<f64>,
}

impl Mlp {
    /// He-normal weights, zero biases.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let he =
            |fan_in: usize| Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let n1 = he(inputs);
        let n2 = he(hidden);
        Self {
            inputs,
            hidden,
            outputs,
            w1: (0..hidden * inputs).map(|_| n1.sample(rng)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..outputs * hidden).map(|_| n2.sample(rng)).collect(),
            b2: vec![0.0; outputs],
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::InvalidParameter {
                field: "params",
                reason: format!("expected {} values, got {}", self.num_params(), p.len()),
            });
        }
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        debug_assert_eq!(x.len(), self.inputs);
        let mut hidden = self.b1.clone();
        // Inputs are mostly zero planes; skipping them is exact.
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (h, acc) in hidden.iter_mut().enumerate() {
                    *acc += self.w1[h * self.inputs + i] * xi;
                }
            }
        }
        for v in &mut hidden {
            *v = v.max(0.0);
        }
        let q = (0..self.outputs)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                self.b2[o] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        Forward { hidden, q }
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).q
    }

    /// Adds to `grad` the gradient of `scale * (Q(x, action) - target)^2`
    /// and returns the unscaled squared error.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let f = self.forward(x);
        let err = f.q[action] - target;
        let dq = 2.0 * err * scale;
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        gb2[action] += dq;
        let row = &self.w2[action * self.hidden..(action + 1) * self.hidden];
        for h in 0..self.hidden {
            gw2[action * self.hidden + h] += dq * f.hidden[h];
            if f.hidden[h] > 0.0 {
                let dh = dq * row[h];
                gb1[h] += dh;
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        gw1[h * self.inputs + i] += dh * xi;
                    }
                }
            }
        }
        err * err
    }

    /// Versioned text format: header, dimensions, then one value per line.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PARAM_HEADER}")?;
        writeln!(w, "{} {} {}", self.inputs, self.hidden, self.outputs)?;
        for v in self.params() {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |row: usize, message: String| Error::Parse { row, message };
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != PARAM_HEADER {
            return Err(bad(
                1,
                format!("expected header `{PARAM_HEADER}`, got `{header}`"),
            ));
        }
        let dims = lines.next().transpose()?.unwrap_or_default();
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(2, format!("bad dimensions: {e}")))?;
        let [inputs, hidden, outputs] = dims[..] else {
            return Err(bad(2, "expected three dimensions".into()));
        };
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            values.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(i + 3, e.to_string()))?,
            );
        }
        let mut net = Self {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
        };
        net.set_params(&values)?;
        Ok(net)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order update rule over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Self {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
                    self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
                    params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}
