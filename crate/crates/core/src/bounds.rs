//! PAC bound assembly for i.i.d. and Markov samples.
//!
//! For each margin level `γ` in the grid the bound is the sum of
//!
//! - the empirical margin risk `(1/n) Σ 1{m_f(x_i, y_i) ≤ γ}`,
//! - the complexity term `2M(2M−1)/γ · R_n(F_+)`,
//! - the iterated-log term `min{1, A Π α_i / γ} √(τ log log₂(2/γ) / n)`,
//! - the confidence term `min{1, A Π α_i / γ} √(τ/(2n) · log(2/δ))`,
//!
//! with `τ = 1` for i.i.d. data and `τ = τ_min` for Markov data. The bound
//! is the minimum over the grid. Markov bounds add a `γ`-independent
//! convergence term after the minimum.

use serde::{Deserialize, Serialize};

use crate::complexity::{bound_theorem, EstimateMethod, RademacherEstimate};
use crate::error::{Error, Result};
use crate::margins::MarginModel;
use crate::markov::ChainAnalysis;
use crate::network::NetworkSpec;

/// `{2^-k : k = 0..=10}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=10).map(|k| 0.5f64.powi(k)).collect()
}

/// Fraction of margins at or below `gamma`.
pub fn empirical_margin_risk(margins: &[f64], gamma: f64) -> Result<f64> {
    if margins.is_empty() {
        return Err(Error::arg("margin list is empty"));
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    let hits = margins.iter().filter(|&&m| m <= gamma).count();
    Ok(hits as f64 / margins.len() as f64)
}

/// Where the `R_n(F_+)` value plugged into the bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum RademacherInput {
    /// Closed-form network bound with the stated `σ_0(0)` convention.
    ClosedForm { value: f64, sigma0_at_zero: f64 },
    /// Exact or Monte Carlo estimate over a finite class.
    Estimate {
        value: f64,
        method: EstimateMethod,
        num_sign_draws: u64,
        std_error: f64,
    },
}

impl RademacherInput {
    pub fn closed_form(net: &NetworkSpec, n: usize, sigma0_at_zero: f64) -> Result<Self> {
        Ok(RademacherInput::ClosedForm {
            value: bound_theorem(net, n, sigma0_at_zero)?,
            sigma0_at_zero,
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            RademacherInput::ClosedForm { value, .. } | RademacherInput::Estimate { value, .. } => {
                value
            }
        }
    }
}

impl From<RademacherEstimate> for RademacherInput {
    fn from(e: RademacherEstimate) -> Self {
        RademacherInput::Estimate {
            value: e.value,
            method: e.method,
            num_sign_draws: e.num_sign_draws,
            std_error: e.std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub delta: f64,
    pub gamma_grid: Vec<f64>,
    /// Doubles the transfer constant `A`.
    pub conservative_constants: bool,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            delta: 0.05,
            gamma_grid: default_gamma_grid(),
            conservative_constants: false,
        }
    }
}

impl BoundSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::arg(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.gamma_grid.is_empty() {
            return Err(Error::arg("gamma grid is empty"));
        }
        if let Some(bad) = self.gamma_grid.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::arg(format!("gamma grid point {bad} outside (0, 1]")));
        }
        Ok(())
    }
}

/// Chain quantities entering the Markov bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTerms {
    pub tau_min: f64,
    pub lambda: f64,
    pub chi_norm: f64,
    /// Bound on `|f|` in the convergence term.
    pub m_f: f64,
}

impl MarkovTerms {
    pub fn from_analysis(analysis: &ChainAnalysis, m_f: f64) -> Self {
        MarkovTerms {
            tau_min: analysis.tau_min,
            lambda: analysis.lambda,
            chi_norm: analysis.chi_norm,
            m_f,
        }
    }

    /// `√(2M/(n(1−λ)) + 64M²/(n²(1−λ)²) · chi)`.
    pub fn convergence_term(&self, n: usize) -> Result<f64> {
        Ok(crate::markov::mse_bound_from(self.lambda, self.chi_norm, n, 0, self.m_f)?.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    pub gamma: f64,
    pub empirical_margin_risk: f64,
    pub complexity_term: f64,
    pub loglog_term: f64,
    pub confidence_term: f64,
    /// Sum of the four terms above, unclamped.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub depth: usize,
    pub alphas: Vec<f64>,
    /// Effective transfer constant (after `conservative_constants`).
    pub transfer_constant: f64,
    pub label_bound: f64,
    pub delta: f64,
    pub conservative_constants: bool,
    pub rademacher: RademacherInput,
    pub markov: Option<MarkovTerms>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gamma_grid: Vec<f64>,
    pub per_gamma: Vec<GammaTerms>,
    pub best_gamma: f64,
    /// `γ`-independent convergence term for Markov data; 0 for i.i.d.
    pub markov_extra_term: f64,
    /// `min_γ total + markov_extra_term` before clamping.
    pub unclamped_value: f64,
    /// The reported probability bound, clamped to `[0, 1]`.
    pub bound_value: f64,
    pub inputs: BoundInputs,
}

impl BoundReport {
    pub fn best_terms(&self) -> &GammaTerms {
        self.per_gamma
            .iter()
            .find(|t| t.gamma == self.best_gamma)
            .expect("best gamma is on the grid")
    }
}

fn assemble(
    margins: &[f64],
    net: &NetworkSpec,
    model: &MarginModel,
    rademacher: RademacherInput,
    settings: &BoundSettings,
    markov: Option<MarkovTerms>,
) -> Result<BoundReport> {
    settings.validate()?;
    let n = margins.len();
    if n < 2 {
        return Err(Error::arg("PAC bounds need at least two samples"));
    }
    if margins.iter().any(|m| m.is_nan()) {
        return Err(Error::arg("margins contain NaN"));
    }
    let r = rademacher.value();
    if !r.is_finite() || r < 0.0 {
        return Err(Error::arg(format!(
            "Rademacher value must be finite and >= 0, got {r}"
        )));
    }
    let tau = match markov {
        Some(mk) => {
            if !mk.tau_min.is_finite() || mk.tau_min <= 0.0 {
                return Err(Error::arg(format!(
                    "tau_min must be positive, got {}",
                    mk.tau_min
                )));
            }
            mk.tau_min
        }
        None => 1.0,
    };
    let extra = match markov {
        Some(mk) => mk.convergence_term(n)?,
        None => 0.0,
    };

    let alphas = net.alphas();
    let alpha_product: f64 = alphas.iter().product();
    let a = model.transfer_constant()
        * if settings.conservative_constants {
            2.0
        } else {
            1.0
        };
    let m = model.label_bound();
    let nf = n as f64;
    let log_conf = (2.0 / settings.delta).ln();

    let mut per_gamma = Vec::with_capacity(settings.gamma_grid.len());
    for &gamma in &settings.gamma_grid {
        let risk = empirical_margin_risk(margins, gamma)?;
        let complexity = 2.0 * m * (2.0 * m - 1.0) / gamma * r;
        let lip = (a * alpha_product / gamma).min(1.0);
        let loglog = (2.0 / gamma).log2().ln().max(0.0);
        let loglog_term = lip * (tau * loglog / nf).sqrt();
        let confidence_term = lip * (tau / (2.0 * nf) * log_conf).sqrt();
        per_gamma.push(GammaTerms {
            gamma,
            empirical_margin_risk: risk,
            complexity_term: complexity,
            loglog_term,
            confidence_term,
            total: risk + complexity + loglog_term + confidence_term,
        });
    }
    let best = per_gamma
        .iter()
        .fold(None::<&GammaTerms>, |b, t| match b {
            Some(b) if b.total <= t.total => Some(b),
            _ => Some(t),
        })
        .expect("non-empty grid");
    let unclamped = best.total + extra;
    Ok(BoundReport {
        gamma_grid: settings.gamma_grid.clone(),
        best_gamma: best.gamma,
        markov_extra_term: extra,
        unclamped_value: unclamped,
        bound_value: unclamped.clamp(0.0, 1.0),
        per_gamma,
        inputs: BoundInputs {
            n,
            depth: net.depth(),
            alphas,
            transfer_constant: a,
            label_bound: m,
            delta: settings.delta,
            conservative_constants: settings.conservative_constants,
            rademacher,
            markov,
        },
    })
}

/// Bound on `P(m_f(X, Y) ≤ 0)` holding with probability `1 − δ` over an
/// i.i.d. sample with the given margins.
pub fn iid_pac_bound(
    margins: &[f64],
    net: &NetworkSpec,
    model: &MarginModel,
    rademacher: RademacherInput,
    settings: &BoundSettings,
) -> Result<BoundReport> {
    assemble(margins, net, model, rademacher, settings, None)
}

/// Markov-sample counterpart of [`iid_pac_bound`]; the risk bounded is under
/// the stationary law.
pub fn markov_pac_bound(
    margins: &[f64],
    net: &NetworkSpec,
    model: &MarginModel,
    rademacher: RademacherInput,
    settings: &BoundSettings,
    markov: MarkovTerms,
) -> Result<BoundReport> {
    assemble(margins, net, model, rademacher, settings, Some(markov))
}
