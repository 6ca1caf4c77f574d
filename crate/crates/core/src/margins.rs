//! Margin functions, their transfer constants, and the γ-margin cost.
//!
//! Labels are passed as indices into the model's label set `Y`. For the
//! binary model `Y = [-1, +1]`, for `squared_ml` it is a user-supplied list
//! of real values, and for softmax it is `0..classes`.
//!
//! Sign convention for `squared_ml`: the margin is
//! `(f(x) - y)² - max_{y' ≠ y} (f(x) - y')²`, taken verbatim. It is positive
//! when the squared error to the true label *exceeds* the largest squared
//! error among the wrong labels, which is the opposite of the usual
//! "correct means positive" reading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    Binary,
    SquaredMl,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginModel {
    kind: MarginKind,
    label_bound: f64,
    labels: Vec<f64>,
}

impl MarginModel {
    /// `f(x)·y` with `Y = {-1, +1}`; transfer constant `A = 1`.
    pub fn binary(label_bound: f64) -> Result<Self> {
        Self::checked(MarginKind::Binary, label_bound, vec![-1.0, 1.0])
    }

    /// Squared-error margin over the real label set `labels`; `A = 8M`.
    pub fn squared_ml(label_bound: f64, labels: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::arg("squared_ml needs at least two labels"));
        }
        if let Some(bad) = labels
            .iter()
            .find(|y| !y.is_finite() || y.abs() > label_bound)
        {
            return Err(Error::arg(format!(
                "label {bad} violates |y| <= M = {label_bound}"
            )));
        }
        Self::checked(MarginKind::SquaredMl, label_bound, labels)
    }

    /// One-hot softmax margin over `classes` outputs; `A = 2`.
    pub fn softmax(label_bound: f64, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::arg("softmax needs at least two classes"));
        }
        Self::checked(
            MarginKind::Softmax,
            label_bound,
            (0..classes).map(|c| c as f64).collect(),
        )
    }

    fn checked(kind: MarginKind, label_bound: f64, labels: Vec<f64>) -> Result<Self> {
        if !label_bound.is_finite() || label_bound <= 0.0 {
            return Err(Error::arg(format!(
                "label bound M must be positive and finite, got {label_bound}"
            )));
        }
        Ok(MarginModel {
            kind,
            label_bound,
            labels,
        })
    }

    pub fn kind(&self) -> MarginKind {
        self.kind
    }

    pub fn label_bound(&self) -> f64 {
        self.label_bound
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Expected length of the network output.
    pub fn output_len(&self) -> usize {
        match self.kind {
            MarginKind::Binary | MarginKind::SquaredMl => 1,
            MarginKind::Softmax => self.labels.len(),
        }
    }

    pub fn transfer_constant(&self) -> f64 {
        match self.kind {
            MarginKind::Binary => 1.0,
            MarginKind::SquaredMl => 8.0 * self.label_bound,
            MarginKind::Softmax => 2.0,
        }
    }

    /// Index of the label with value `value` (exact match).
    pub fn label_index(&self, value: f64) -> Result<usize> {
        self.labels
            .iter()
            .position(|&y| y == value)
            .ok_or_else(|| Error::arg(format!("label {value} is not in Y = {:?}", self.labels)))
    }

    fn check(&self, f_out: &[f64], y: usize) -> Result<()> {
        if f_out.len() != self.output_len() {
            return Err(Error::dim(format!(
                "{:?} margin expects an output of length {}, got {}",
                self.kind,
                self.output_len(),
                f_out.len()
            )));
        }
        if y >= self.labels.len() {
            return Err(Error::arg(format!(
                "label index {y} outside Y (|Y| = {})",
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn margin(&self, f_out: &[f64], y: usize) -> Result<f64> {
        self.check(f_out, y)?;
        Ok(match self.kind {
            MarginKind::Binary => f_out[0] * self.labels[y],
            MarginKind::SquaredMl => {
                let f = f_out[0];
                let own = (f - self.labels[y]).powi(2);
                let worst_other = self
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != y)
                    .map(|(_, &l)| (f - l).powi(2))
                    .fold(f64::NEG_INFINITY, f64::max);
                own - worst_other
            }
            MarginKind::Softmax => {
                let best_other = f_out
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != y)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                f_out[y] - best_other
            }
        })
    }

    /// `(|m(a, y) - m(b, y)|, A·‖a - b‖_∞)`.
    pub fn transfer_gap(&self, f_out_a: &[f64], f_out_b: &[f64], y: usize) -> Result<(f64, f64)> {
        if f_out_a.len() != f_out_b.len() {
            return Err(Error::dim("outputs have different shapes"));
        }
        let lhs = (self.margin(f_out_a, y)? - self.margin(f_out_b, y)?).abs();
        let sup = f_out_a
            .iter()
            .zip(f_out_b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((lhs, self.transfer_constant() * sup))
    }
}

/// Ramp surrogate: 1 below zero, 0 above `gamma`, linear in between.
pub fn zeta(x: f64, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    Ok(if x >= gamma {
        0.0
    } else if x <= 0.0 {
        1.0
    } else {
        1.0 - x / gamma
    })
}
