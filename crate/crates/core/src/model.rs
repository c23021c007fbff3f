//! Takagi-Sugeno rule base and its normalized-fuzzy-mean inference.
//!
//! Each rule pairs a product of univariate Gaussian memberships over the
//! antecedent columns with an affine model over the consequent columns. The
//! model output is the activation-weighted mean of the local outputs.
//!
//! Activations are evaluated in log-space: with many antecedent dimensions
//! the product of Gaussian factors underflows long before the normalized
//! mean becomes ill-defined.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Centering;
use crate::error::{Error, Result};

/// Below this total activation the normalized mean is treated as 0/0.
pub const ACTIVATION_FLOOR: f64 = 1e-300;

/// Univariate Gaussian membership `exp(-(x - center)^2 / (2 variance))`.
pub fn gaussian_mf(center: f64, variance: f64, x: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "membership variance must be positive, got {variance}"
        )));
    }
    let d = x - center;
    Ok((-0.5 * d * d / variance).exp())
}

/// Per-dimension Gaussian memberships of one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianAntecedent {
    centers: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianAntecedent {
    pub fn new(centers: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != variances.len() {
            return Err(Error::Shape(format!(
                "antecedent needs matching nonempty centers/variances, got {} and {}",
                centers.len(),
                variances.len()
            )));
        }
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "antecedent variance must be positive, got {v}"
            )));
        }
        Ok(GaussianAntecedent { centers, variances })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    /// `-1/2 (x - v)^T F^-1 (x - v)` with diagonal F.
    fn log_membership(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.variances)
            .zip(x)
            .map(|((c, v), xi)| {
                let d = xi - c;
                -0.5 * d * d / v
            })
            .sum()
    }

    /// Squared distance scaled by the per-dimension variances.
    fn scaled_distance(&self, x: &[f64]) -> f64 {
        -2.0 * self.log_membership(x)
    }
}

/// Affine consequent `gains . phi + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearModel {
    pub gains: Vec<f64>,
    pub offset: f64,
}

impl LocalLinearModel {
    /// Splits `[gains.., offset]`.
    pub fn from_theta(theta: &[f64]) -> Self {
        let (gains, offset) = theta.split_at(theta.len() - 1);
        LocalLinearModel {
            gains: gains.to_vec(),
            offset: offset[0],
        }
    }

    pub fn output(&self, phi: &[f64]) -> f64 {
        self.gains.iter().zip(phi).map(|(a, p)| a * p).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: GaussianAntecedent,
    pub consequent: LocalLinearModel,
    /// Rule impact. Values above 1 are legal when produced by clustering;
    /// only activation ratios enter the output.
    pub weight: f64,
}

impl Rule {
    pub fn new(
        antecedent: GaussianAntecedent,
        consequent: LocalLinearModel,
        weight: f64,
    ) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rule weight must be finite and non-negative, got {weight}"
            )));
        }
        Ok(Rule {
            antecedent,
            consequent,
            weight,
        })
    }

    /// `ln(w) - 1/2 sum_j (x_j - v_j)^2 / sigma_j^2`; `-inf` for zero weight.
    pub fn log_activation(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.antecedent.dim() {
            return Err(Error::Shape(format!(
                "rule expects {} antecedent values, got {}",
                self.antecedent.dim(),
                x.len()
            )));
        }
        Ok(self.weight.ln() + self.antecedent.log_membership(x))
    }
}

/// Degree of fulfilment `w * exp(-1/2 (x-v)^T F^-1 (x-v))`, evaluated as a
/// single exponential of the summed exponents.
pub fn rule_activation(rule: &Rule, x: &[f64]) -> Result<f64> {
    Ok(rule.log_activation(x)?.exp())
}

/// Degree of fulfilment as the weight times the product of the univariate
/// memberships. Equal to [`rule_activation`] up to rounding.
pub fn rule_activation_product(rule: &Rule, x: &[f64]) -> Result<f64> {
    if x.len() != rule.antecedent.dim() {
        return Err(Error::Shape(format!(
            "rule expects {} antecedent values, got {}",
            rule.antecedent.dim(),
            x.len()
        )));
    }
    let mut product = rule.weight;
    for ((c, v), xi) in rule
        .antecedent
        .centers
        .iter()
        .zip(&rule.antecedent.variances)
        .zip(x)
    {
        product *= gaussian_mf(*c, *v, *xi)?;
    }
    Ok(product)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub rule_activations: Vec<f64>,
    /// Set when every activation fell below [`ACTIVATION_FLOOR`] and the
    /// nearest rule's local output was returned instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsModel {
    rules: Vec<Rule>,
    input_names: Vec<String>,
    antecedent_columns: Vec<usize>,
    consequent_columns: Vec<usize>,
    centering: Centering,
}

impl TsModel {
    pub fn new(
        rules: Vec<Rule>,
        input_names: Vec<String>,
        antecedent_columns: Vec<usize>,
        consequent_columns: Vec<usize>,
        centering: Centering,
    ) -> Result<Self> {
        let model = TsModel {
            rules,
            input_names,
            antecedent_columns,
            consequent_columns,
            centering,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural invariant. Also used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let k = self.input_names.len();
        if self.rules.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one rule".into()));
        }
        if k == 0 {
            return Err(Error::Shape("model has no input columns".into()));
        }
        if self.centering.descriptor_means.len() != k {
            return Err(Error::Shape(format!(
                "{} centering means for {k} inputs",
                self.centering.descriptor_means.len()
            )));
        }
        for (what, cols) in [
            ("antecedent", &self.antecedent_columns),
            ("consequent", &self.consequent_columns),
        ] {
            let mut seen = HashSet::new();
            for &c in cols {
                if c >= k {
                    return Err(Error::Shape(format!(
                        "{what} column {c} out of range for {k} inputs"
                    )));
                }
                if !seen.insert(c) {
                    return Err(Error::InvalidConfig(format!("duplicate {what} column {c}")));
                }
            }
        }
        if self.antecedent_columns.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one antecedent column".into()));
        }
        let n = self.antecedent_columns.len();
        let nr = self.consequent_columns.len();
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.antecedent.dim() != n || rule.consequent.gains.len() != nr {
                return Err(Error::Shape(format!(
                    "rule {i} has dimensions ({}, {}), model expects ({n}, {nr})",
                    rule.antecedent.dim(),
                    rule.consequent.gains.len()
                )));
            }
            // Re-run constructor checks on deserialized payloads.
            GaussianAntecedent::new(
                rule.antecedent.centers.clone(),
                rule.antecedent.variances.clone(),
            )?;
            if !(rule.weight >= 0.0) || !rule.weight.is_finite() {
                return Err(Error::InvalidParameter(format!("rule {i} has weight {}", rule.weight)));
            }
        }
        Ok(())
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn input_width(&self) -> usize {
        self.input_names.len()
    }

    pub fn antecedent_columns(&self) -> &[usize] {
        &self.antecedent_columns
    }

    pub fn consequent_columns(&self) -> &[usize] {
        &self.consequent_columns
    }

    pub fn centering(&self) -> &Centering {
        &self.centering
    }

    /// Copy with every rule weight set to 1.
    pub fn with_unit_weights(&self) -> TsModel {
        let mut model = self.clone();
        for rule in &mut model.rules {
            rule.weight = 1.0;
        }
        model
    }

    /// Copy that keeps only the inputs some rule reads, in their original
    /// order. Predictions are unchanged.
    pub fn compact(&self) -> TsModel {
        let used: Vec<usize> = (0..self.input_width())
            .filter(|c| self.antecedent_columns.contains(c) || self.consequent_columns.contains(c))
            .collect();
        let remap = |cols: &[usize]| -> Vec<usize> {
            cols.iter()
                .map(|c| used.iter().position(|u| u == c).expect("used column"))
                .collect()
        };
        TsModel {
            rules: self.rules.clone(),
            input_names: used.iter().map(|&c| self.input_names[c].clone()).collect(),
            antecedent_columns: remap(&self.antecedent_columns),
            consequent_columns: remap(&self.consequent_columns),
            centering: Centering {
                descriptor_means: used.iter().map(|&c| self.centering.descriptor_means[c]).collect(),
                activity_mean: self.centering.activity_mean,
            },
        }
    }

    /// Consequents re-expressed on uncentered inputs and activity:
    /// `y = gains . phi_raw + offset`.
    pub fn raw_consequents(&self) -> Vec<LocalLinearModel> {
        let means = &self.centering.descriptor_means;
        self.rules
            .iter()
            .map(|rule| {
                let shift: f64 = rule
                    .consequent
                    .gains
                    .iter()
                    .zip(&self.consequent_columns)
                    .map(|(a, &c)| a * means[c])
                    .sum();
                LocalLinearModel {
                    gains: rule.consequent.gains.clone(),
                    offset: rule.consequent.offset + self.centering.activity_mean - shift,
                }
            })
            .collect()
    }

    fn gather(&self, centered: &[f64], columns: &[usize]) -> Vec<f64> {
        columns.iter().map(|&c| centered[c]).collect()
    }

    /// Normalized fuzzy mean of the local outputs on a raw (uncentered) input.
    pub fn predict(&self, u: &[f64]) -> Result<Prediction> {
        if u.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "model expects {} inputs, got {}",
                self.input_width(),
                u.len()
            )));
        }
        let centered: Vec<f64> = u
            .iter()
            .zip(&self.centering.descriptor_means)
            .map(|(x, m)| x - m)
            .collect();
        let x = self.gather(&centered, &self.antecedent_columns);
        let phi = self.gather(&centered, &self.consequent_columns);

        let log_act = self
            .rules
            .iter()
            .map(|r| r.log_activation(&x))
            .collect::<Result<Vec<f64>>>()?;
        let outputs: Vec<f64> = self.rules.iter().map(|r| r.consequent.output(&phi)).collect();
        let rule_activations: Vec<f64> = log_act.iter().map(|l| l.exp()).collect();

        let max = log_act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_act.iter().map(|l| (l - max).exp()).collect();
        let total_scaled: f64 = scaled.iter().sum();
        let log_total = if max.is_finite() {
            max + total_scaled.ln()
        } else {
            f64::NEG_INFINITY
        };

        let (value, fallback) = if log_total < ACTIVATION_FLOOR.ln() {
            let nearest = self
                .rules
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.antecedent.scaled_distance(&x)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0;
            (outputs[nearest], true)
        } else {
            let num: f64 = scaled.iter().zip(&outputs).map(|(b, y)| b * y).sum();
            (num / total_scaled, false)
        };
        Ok(Prediction {
            value: value + self.centering.activity_mean,
            rule_activations,
            fallback,
        })
    }

    /// [`TsModel::predict`] applied to every row. Rows are evaluated in
    /// parallel; each result depends only on its own row.
    pub fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        if inputs.nrows() > 0 && inputs.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "model expects {} columns, got {}",
                self.input_width(),
                inputs.ncols()
            )));
        }
        let values = (0..inputs.nrows())
            .into_par_iter()
            .map(|r| {
                let row: Vec<f64> = inputs.row(r).iter().copied().collect();
                self.predict(&row).map(|p| p.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(DVector::from_vec(values))
    }
}
