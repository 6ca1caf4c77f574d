//! Feed-forward networks with per-layer Lipschitz metadata.
//!
//! Layer `i` maps `v ↦ σ_i(W_iᵀ v)`. The first layer consumes the augmented
//! input `[x; 1]`, so `W_1` has `d + 1` rows. Every other `W_i` has `d_i`
//! rows and `d_{i+1}` columns.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Max over columns of the column's absolute-entry sum.
pub fn norm_1_inf(w: &DMatrix<f64>) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::dim("norm_1_inf of an empty matrix"));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    Ok(w.column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
    Custom,
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
            ActivationKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar activation together with its declared Lipschitz constant `beta`
/// and its value at zero.
#[derive(Clone)]
pub struct Activation {
    kind: ActivationKind,
    beta: f64,
    value_at_zero: f64,
    function: Option<ScalarFn>,
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Activation")
            .field("kind", &self.kind)
            .field("beta", &self.beta)
            .field("value_at_zero", &self.value_at_zero)
            .field("has_function", &self.function.is_some())
            .finish()
    }
}

impl PartialEq for Activation {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.beta == other.beta
            && self.value_at_zero == other.value_at_zero
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    pub fn relu() -> Self {
        Self::builtin(ActivationKind::Relu, 1.0, 0.0)
    }

    /// Logistic sigmoid, 1/4-Lipschitz.
    pub fn sigmoid() -> Self {
        Self::builtin(ActivationKind::Sigmoid, 0.25, 0.5)
    }

    pub fn tanh() -> Self {
        Self::builtin(ActivationKind::Tanh, 1.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::builtin(ActivationKind::Identity, 1.0, 0.0)
    }

    fn builtin(kind: ActivationKind, beta: f64, value_at_zero: f64) -> Self {
        Activation {
            kind,
            beta,
            value_at_zero,
            function: None,
        }
    }

    /// A user-declared activation. The Lipschitz constant is never inferred;
    /// without `function` the activation only supports bound arithmetic, not
    /// forward evaluation.
    pub fn custom(beta: f64, value_at_zero: f64, function: Option<ScalarFn>) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::arg(format!(
                "custom activation needs a finite beta >= 0, got {beta}"
            )));
        }
        if !value_at_zero.is_finite() {
            return Err(Error::arg("custom activation value_at_zero must be finite"));
        }
        if let Some(f) = &function {
            let at_zero = f(0.0);
            if (at_zero - value_at_zero).abs() > 1e-9 * (1.0 + value_at_zero.abs()) {
                return Err(Error::arg(format!(
                    "custom activation declares value_at_zero {value_at_zero} but evaluates to {at_zero}"
                )));
            }
        }
        Ok(Activation {
            kind: ActivationKind::Custom,
            beta,
            value_at_zero,
            function,
        })
    }

    pub fn from_kind(kind: ActivationKind) -> Result<Self> {
        match kind {
            ActivationKind::Relu => Ok(Self::relu()),
            ActivationKind::Sigmoid => Ok(Self::sigmoid()),
            ActivationKind::Tanh => Ok(Self::tanh()),
            ActivationKind::Identity => Ok(Self::identity()),
            ActivationKind::Custom => Err(Error::arg(
                "custom activations require an explicit beta and value_at_zero",
            )),
        }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn is_evaluable(&self) -> bool {
        self.kind != ActivationKind::Custom || self.function.is_some()
    }

    pub fn try_eval(&self, x: f64) -> Result<f64> {
        match self.kind {
            ActivationKind::Relu => Ok(x.max(0.0)),
            ActivationKind::Sigmoid => Ok(sigmoid(x)),
            ActivationKind::Tanh => Ok(x.tanh()),
            ActivationKind::Identity => Ok(x),
            ActivationKind::Custom => match &self.function {
                Some(f) => Ok(f(x)),
                None => Err(Error::arg(
                    "custom activation has no function attached; it cannot be evaluated",
                )),
            },
        }
    }
}

/// A feed-forward network at concrete weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    dims: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    activations: Vec<Activation>,
    norm_caps: Vec<Option<f64>>,
}

impl NetworkSpec {
    /// `dims` is `[d, d_2, …, d_{L+1}]`, so `dims.len() == L + 1`.
    pub fn new(
        dims: Vec<usize>,
        weights: Vec<DMatrix<f64>>,
        activations: Vec<Activation>,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::dim(
                "a network needs at least one layer (dims of length >= 2)",
            ));
        }
        if dims.contains(&0) {
            return Err(Error::dim("layer widths must be positive"));
        }
        let depth = dims.len() - 1;
        if weights.len() != depth || activations.len() != depth {
            return Err(Error::dim(format!(
                "dims imply {depth} layers but got {} weight matrices and {} activations",
                weights.len(),
                activations.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            let rows = if i == 0 { dims[0] + 1 } else { dims[i] };
            let cols = dims[i + 1];
            if w.nrows() != rows || w.ncols() != cols {
                return Err(Error::dim(format!(
                    "layer {} weight is {}x{}, expected {rows}x{cols}",
                    i + 1,
                    w.nrows(),
                    w.ncols()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg(format!(
                    "layer {} has non-finite weights",
                    i + 1
                )));
            }
        }
        Ok(NetworkSpec {
            dims,
            weights,
            activations,
            norm_caps: vec![None; depth],
        })
    }

    /// Replaces the computed `‖W_layer‖_{1,∞}` by a class-level cap in the
    /// `alpha` computation. `layer` is 1-based.
    pub fn with_norm_cap(mut self, layer: usize, cap: f64) -> Result<Self> {
        self.check_layer(layer)?;
        if !cap.is_finite() || cap < 0.0 {
            return Err(Error::arg(format!(
                "norm cap must be finite and >= 0, got {cap}"
            )));
        }
        let actual = norm_1_inf(&self.weights[layer - 1])?;
        if actual > cap * (1.0 + 1e-12) {
            return Err(Error::arg(format!(
                "layer {layer} has norm {actual} above the requested cap {cap}"
            )));
        }
        self.norm_caps[layer - 1] = Some(cap);
        Ok(self)
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::arg(format!(
                "layer index {layer} outside 1..={}",
                self.depth()
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn norm_caps(&self) -> &[Option<f64>] {
        &self.norm_caps
    }

    /// `β_i · ‖W_i‖_{1,∞}` (or the cap, when set) for `1 ≤ i ≤ L`, and `1`
    /// for `i = L + 1`.
    pub fn alpha(&self, layer: usize) -> Result<f64> {
        if layer == self.depth() + 1 {
            return Ok(1.0);
        }
        self.check_layer(layer)?;
        let norm = match self.norm_caps[layer - 1] {
            Some(cap) => cap,
            None => norm_1_inf(&self.weights[layer - 1])?,
        };
        Ok(self.activations[layer - 1].beta() * norm)
    }

    /// `[α_1, …, α_L]`.
    pub fn alphas(&self) -> Vec<f64> {
        (1..=self.depth())
            .map(|i| self.alpha(i).expect("validated at construction"))
            .collect()
    }

    pub fn alpha_product(&self) -> f64 {
        self.alphas().iter().product()
    }

    /// `[σ_0(0), σ_1(0), …, σ_L(0)]` with the supplied convention for the
    /// input embedding.
    pub fn values_at_zero(&self, sigma0_at_zero: f64) -> Vec<f64> {
        std::iter::once(sigma0_at_zero)
            .chain(self.activations.iter().map(Activation::value_at_zero))
            .collect()
    }

    /// `f_0(x) = [x; 1]`.
    pub fn augment(x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len() + 1, x.iter().copied().chain(std::iter::once(1.0)))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("input has non-finite entries"));
        }
        if !inputs_in_unit_cube(x) {
            log::warn!("network input {x:?} lies outside [0,1]^d; the complexity bound assumes it does not");
        }
        let mut v = Self::augment(x);
        for (w, act) in self.weights.iter().zip(&self.activations) {
            if !act.is_evaluable() {
                return Err(Error::arg(
                    "network contains a custom activation without a function",
                ));
            }
            let pre = w.tr_mul(&v);
            v = pre.map(|z| act.try_eval(z).expect("checked evaluable"));
        }
        Ok(v.iter().copied().collect())
    }
}

pub fn inputs_in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}
