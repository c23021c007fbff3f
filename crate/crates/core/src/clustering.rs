//! Modified Gath-Geva clustering for Takagi-Sugeno identification.
//!
//! Every cluster carries a diagonal Gaussian over the antecedent columns, an
//! affine local model over the consequent columns and a Gaussian model-error
//! density. The alternating optimization repeats three steps until the
//! partition stops moving:
//!
//! 1. fit prototypes (centers, variances, local models, error variances,
//!    priors, rule weights) with `mu^m` weights,
//! 2. evaluate the inverse distance `1/D^2` as the joint likelihood of each
//!    sample under each cluster,
//! 3. redistribute memberships.
//!
//! Likelihoods are handled as logarithms everywhere: `D^2` itself overflows
//! as soon as the model-error variance of a cluster becomes small.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{Centering, Dataset};
use crate::error::{Error, Result};
use crate::model::{GaussianAntecedent, LocalLinearModel, Rule, TsModel};

/// Memberships are kept at or above this value so that no cluster's row sum
/// can reach exactly zero.
pub const MEMBERSHIP_FLOOR: f64 = 1e-300;

/// Clusters whose `sum_k mu^m` falls below this are re-seeded.
pub const DEGENERATE_MASS: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `c x N` fuzzy membership matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMatrix {
    memberships: DMatrix<f64>,
}

impl PartitionMatrix {
    /// Wraps a membership matrix after checking the fuzzy-partition
    /// constraints with tolerance `1e-9`.
    pub fn new(memberships: DMatrix<f64>) -> Result<Self> {
        let p = PartitionMatrix { memberships };
        p.check_constraints(1e-9).map_err(Error::InvalidParameter)?;
        Ok(p)
    }

    pub fn memberships(&self) -> &DMatrix<f64> {
        &self.memberships
    }

    pub fn cluster_count(&self) -> usize {
        self.memberships.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.memberships.ncols()
    }

    /// Entries in [0, 1], columns summing to one, row sums in (0, N).
    ///
    /// Row sums must be strictly positive. The upper bound is checked as
    /// `<= N + tol`: a single cluster always owns every sample, and a crisp
    /// cluster next to floored memberships rounds to exactly N.
    pub fn check_constraints(&self, tol: f64) -> std::result::Result<(), String> {
        let (c, n) = self.memberships.shape();
        if c == 0 || n == 0 {
            return Err("partition matrix is empty".into());
        }
        for (k, col) in self.memberships.column_iter().enumerate() {
            if let Some((i, mu)) = col
                .iter()
                .enumerate()
                .find(|(_, mu)| !(**mu >= -tol && **mu <= 1.0 + tol))
            {
                return Err(format!("membership ({i}, {k}) = {mu} outside [0, 1]"));
            }
            let s = col.sum();
            if (s - 1.0).abs() > tol {
                return Err(format!("column {k} sums to {s}"));
            }
        }
        for (i, row) in self.memberships.row_iter().enumerate() {
            let s = row.sum();
            if !(s > 0.0) || s > n as f64 + tol {
                return Err(format!("row {i} sums to {s}, outside (0, {n})"));
            }
        }
        Ok(())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &PartitionMatrix) -> f64 {
        self.memberships
            .iter()
            .zip(other.memberships.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Column `k` of the result is column `order[k]` of `self`.
    pub fn select_samples(&self, order: &[usize]) -> PartitionMatrix {
        PartitionMatrix {
            memberships: self.memberships.select_columns(order),
        }
    }

    /// Cluster index with the highest membership for each sample.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.memberships
            .column_iter()
            .map(|col| col.argmax().0)
            .collect()
    }
}

/// Which descriptor columns feed the antecedents and the consequents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    pub antecedent: Vec<usize>,
    pub consequent: Vec<usize>,
}

impl ColumnRoles {
    /// Every column in both roles.
    pub fn all(width: usize) -> Self {
        ColumnRoles {
            antecedent: (0..width).collect(),
            consequent: (0..width).collect(),
        }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.antecedent.is_empty() {
            return Err(Error::InvalidConfig("no antecedent columns".into()));
        }
        for (what, cols) in [("antecedent", &self.antecedent), ("consequent", &self.consequent)] {
            let mut seen = vec![false; width];
            for &c in cols {
                if c >= width {
                    return Err(Error::InvalidConfig(format!(
                        "{what} column {c} out of range for width {width}"
                    )));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidConfig(format!("duplicate {what} column {c}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringConfig {
    pub cluster_count: usize,
    /// Weighting exponent m > 1.
    pub fuzziness: f64,
    /// Stop once the partition moves less than this in max-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Variance floors are this fraction of the per-column data variance.
    pub variance_floor_scale: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            cluster_count: 2,
            fuzziness: 2.0,
            tolerance: 1e-4,
            max_iterations: 200,
            seed: 42,
            variance_floor_scale: 1e-8,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_count < 1 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        if !(self.fuzziness > 1.0) || !self.fuzziness.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fuzziness must be > 1, got {}",
                self.fuzziness
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max iterations must be at least 1".into()));
        }
        if !(self.variance_floor_scale > 0.0) || !self.variance_floor_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "variance floor scale must be > 0, got {}",
                self.variance_floor_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrototype {
    /// Antecedent center, one entry per antecedent column.
    pub center: Vec<f64>,
    pub variances: Vec<f64>,
    /// `[gains.., offset]` of the local model.
    pub theta: Vec<f64>,
    pub model_error_variance: f64,
    pub prior: f64,
    pub rule_weight: f64,
}

impl ClusterPrototype {
    /// Prediction of the local model on a consequent vector.
    pub fn local_output(&self, phi: &[f64]) -> f64 {
        let (gains, offset) = self.theta.split_at(self.theta.len() - 1);
        gains.iter().zip(phi).map(|(a, p)| a * p).sum::<f64>() + offset[0]
    }

    /// `ln(1/D^2)` for one sample: log rule weight, antecedent Gaussian
    /// exponent and the model-error density of the residual.
    fn log_likelihood(&self, x: &[f64], phi: &[f64], y: f64) -> f64 {
        let geometric: f64 = self
            .center
            .iter()
            .zip(&self.variances)
            .zip(x)
            .map(|((v, s2), xi)| {
                let d = xi - v;
                -0.5 * d * d / s2
            })
            .sum();
        let r = y - self.local_output(phi);
        let output = -0.5 * (LN_2PI + self.model_error_variance.ln())
            - r * r / (2.0 * self.model_error_variance);
        self.rule_weight.ln() + geometric + output
    }
}

/// Per-column floors derived from the data.
#[derive(Debug, Clone)]
struct VarianceFloors {
    antecedent: Vec<f64>,
    output: f64,
    /// Unfloored biased variances of the antecedent columns.
    antecedent_data: Vec<f64>,
    output_data: f64,
}

fn biased_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

impl VarianceFloors {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, roles: &ColumnRoles, scale: f64) -> Self {
        let floor = |var: f64| if var > 0.0 { scale * var } else { scale };
        let antecedent_data: Vec<f64> = roles
            .antecedent
            .iter()
            .map(|&j| biased_variance(x.column(j).iter().copied()))
            .collect();
        let output_data = biased_variance(y.iter().copied());
        VarianceFloors {
            antecedent: antecedent_data.iter().map(|&v| floor(v)).collect(),
            output: floor(output_data),
            antecedent_data,
            output_data,
        }
    }
}

/// Rows of `x` restricted to `columns`.
fn gather_row(x: &DMatrix<f64>, row: usize, columns: &[usize]) -> Vec<f64> {
    columns.iter().map(|&c| x[(row, c)]).collect()
}

/// `[phi 1]` regression matrix for the consequent columns.
pub fn extended_regressors(x: &DMatrix<f64>, consequent: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    let p = consequent.len();
    DMatrix::from_fn(n, p + 1, |r, c| if c < p { x[(r, consequent[c])] } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    pub theta: DVector<f64>,
    /// The weighted design matrix had numerical rank below its column count;
    /// `theta` is then the minimum-norm solution.
    pub rank_deficient: bool,
    /// Ratio of extreme singular values of the weighted design matrix.
    pub condition_number: f64,
}

/// Minimizes `sum_k w_k (y_k - phi_e,k theta)^2` through an SVD of the
/// `sqrt(w)`-scaled system.
pub fn weighted_least_squares(
    phi_e: &DMatrix<f64>,
    weights: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<WlsSolution> {
    let (n, p) = phi_e.shape();
    if weights.len() != n || y.len() != n {
        return Err(Error::Shape(format!(
            "regressors have {n} rows, weights {} and targets {}",
            weights.len(),
            y.len()
        )));
    }
    if p == 0 {
        return Err(Error::Shape("regression matrix has no columns".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidParameter("all weights are zero".into()));
    }
    let sqrt_w = weights.map(f64::sqrt);
    let mut b = phi_e.clone();
    for (r, s) in sqrt_w.iter().enumerate() {
        b.row_mut(r).scale_mut(*s);
    }
    let rhs = y.component_mul(&sqrt_w);

    let svd = b.svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = f64::EPSILON * n.max(p) as f64 * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let s_min = if svd.singular_values.len() < p {
        0.0
    } else {
        svd.singular_values.min()
    };
    let theta = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(WlsSolution {
        theta,
        rank_deficient: rank < p,
        condition_number: if s_min > 0.0 { s_max / s_min } else { f64::INFINITY },
    })
}

/// Prototypes plus what had to be patched while computing them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeUpdate {
    pub prototypes: Vec<ClusterPrototype>,
    /// Clusters re-seeded because their membership mass vanished.
    pub reseeded: Vec<usize>,
    /// Clusters whose local model came from a rank-deficient system.
    pub rank_deficient: Vec<usize>,
}

fn fit_prototype(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    phi_e: &DMatrix<f64>,
    memberships: &[f64],
    m: f64,
    roles: &ColumnRoles,
    floors: &VarianceFloors,
) -> Result<(ClusterPrototype, bool)> {
    let n = y.len();
    let weights = DVector::from_iterator(n, memberships.iter().map(|mu| mu.powf(m)));
    let mass = weights.sum();

    let center: Vec<f64> = roles
        .antecedent
        .iter()
        .map(|&j| weights.iter().zip(x.column(j).iter()).map(|(w, v)| w * v).sum::<f64>() / mass)
        .collect();
    let variances: Vec<f64> = roles
        .antecedent
        .iter()
        .zip(&center)
        .zip(&floors.antecedent)
        .map(|((&j, v), floor)| {
            let s2 = weights
                .iter()
                .zip(x.column(j).iter())
                .map(|(w, xv)| w * (xv - v).powi(2))
                .sum::<f64>()
                / mass;
            s2.max(*floor)
        })
        .collect();

    let wls = weighted_least_squares(phi_e, &weights, y)?;
    let fitted = phi_e * &wls.theta;
    let model_error_variance = (weights
        .iter()
        .zip(y.iter().zip(fitted.iter()))
        .map(|(w, (yk, fk))| w * (yk - fk).powi(2))
        .sum::<f64>()
        / mass)
        .max(floors.output);

    let prior = memberships.iter().sum::<f64>() / n as f64;
    let log_norm: f64 = variances.iter().map(|s2| -0.5 * (LN_2PI + s2.ln())).sum();
    let rule_weight = (prior.ln() + log_norm).exp();

    Ok((
        ClusterPrototype {
            center,
            variances,
            theta: wls.theta.iter().copied().collect(),
            model_error_variance,
            prior,
            rule_weight,
        },
        wls.rank_deficient,
    ))
}

/// Fits every cluster's prototype from the current partition.
///
/// Centers and variances are `mu^m`-weighted moments of the antecedent
/// columns, the local models come from weighted least squares with the same
/// weights, priors are mean memberships and rule weights are
/// `prior * prod_j (2 pi sigma_j^2)^(-1/2)`.
///
/// A cluster with `sum_k mu^m < 1e-12` is re-seeded: the sample that is worst
/// explained by the remaining local models is assigned to it crisply, its
/// antecedent variances are reset to the data variances and its error
/// variance to the activity variance.
pub fn update_prototypes(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    partition: &PartitionMatrix,
    config: &ClusteringConfig,
    roles: &ColumnRoles,
) -> Result<PrototypeUpdate> {
    let n = x.nrows();
    if y.len() != n || partition.sample_count() != n {
        return Err(Error::Shape(format!(
            "{n} descriptor rows, {} activities, {} partition columns",
            y.len(),
            partition.sample_count()
        )));
    }
    roles.validate(x.ncols())?;
    let floors = VarianceFloors::new(x, y, roles, config.variance_floor_scale);
    let phi_e = extended_regressors(x, &roles.consequent);
    let m = config.fuzziness;
    let c = partition.cluster_count();

    let mut memberships = partition.memberships.clone();
    let mass = |mu: &DMatrix<f64>, i: usize| mu.row(i).iter().map(|v| v.powf(m)).sum::<f64>();
    let degenerate: Vec<usize> = (0..c).filter(|&i| mass(&memberships, i) < DEGENERATE_MASS).collect();

    if !degenerate.is_empty() {
        // Residual of each sample under its best-fitting healthy local model.
        let mut best_residual = vec![f64::INFINITY; n];
        for i in (0..c).filter(|i| !degenerate.contains(i)) {
            let row: Vec<f64> = memberships.row(i).iter().copied().collect();
            let (proto, _) = fit_prototype(x, y, &phi_e, &row, m, roles, &floors)?;
            for (k, best) in best_residual.iter_mut().enumerate() {
                let phi = gather_row(x, k, &roles.consequent);
                *best = best.min((y[k] - proto.local_output(&phi)).abs());
            }
        }
        let mut taken = vec![false; n];
        for &i in &degenerate {
            let worst = (0..n)
                .filter(|&k| !taken[k])
                .fold(None::<usize>, |acc, k| match acc {
                    Some(a) if best_residual[a] >= best_residual[k] => Some(a),
                    _ => Some(k),
                })
                .ok_or_else(|| Error::InvalidConfig("more degenerate clusters than samples".into()))?;
            taken[worst] = true;
            memberships.column_mut(worst).fill(0.0);
            memberships[(i, worst)] = 1.0;
        }
    }

    let mut prototypes = Vec::with_capacity(c);
    let mut rank_deficient = Vec::new();
    for i in 0..c {
        let row: Vec<f64> = memberships.row(i).iter().copied().collect();
        let (mut proto, deficient) = fit_prototype(x, y, &phi_e, &row, m, roles, &floors)?;
        if degenerate.contains(&i) {
            proto.variances = floors
                .antecedent_data
                .iter()
                .zip(&floors.antecedent)
                .map(|(v, f)| v.max(*f))
                .collect();
            proto.model_error_variance = floors.output_data.max(floors.output);
            let log_norm: f64 = proto.variances.iter().map(|s2| -0.5 * (LN_2PI + s2.ln())).sum();
            proto.rule_weight = (proto.prior.ln() + log_norm).exp();
        } else if deficient {
            rank_deficient.push(i);
        }
        prototypes.push(proto);
    }
    Ok(PrototypeUpdate {
        prototypes,
        reseeded: degenerate,
        rank_deficient,
    })
}

/// `ln(1/D^2_{i,k})` for every cluster and sample (`c x N`).
pub fn log_likelihoods(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prototypes: &[ClusterPrototype],
    roles: &ColumnRoles,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} descriptor rows, {} activities", y.len())));
    }
    for (i, p) in prototypes.iter().enumerate() {
        if p.center.len() != roles.antecedent.len()
            || p.variances.len() != roles.antecedent.len()
            || p.theta.len() != roles.consequent.len() + 1
        {
            return Err(Error::Shape(format!("prototype {i} does not match the column roles")));
        }
        if p.variances.iter().any(|v| !(*v > 0.0))
            || !(p.model_error_variance > 0.0)
            || !(p.rule_weight > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "prototype {i} has a non-positive variance or weight"
            )));
        }
    }
    let mut ll = DMatrix::zeros(prototypes.len(), n);
    for k in 0..n {
        let xa = gather_row(x, k, &roles.antecedent);
        let phi = gather_row(x, k, &roles.consequent);
        for (i, p) in prototypes.iter().enumerate() {
            ll[(i, k)] = p.log_likelihood(&xa, &phi, y[k]);
        }
    }
    Ok(ll)
}

/// Squared distances `D^2 = exp(-ln(1/D^2))`. May overflow to infinity for
/// samples far from a cluster; prefer [`log_likelihoods`] for computation.
pub fn compute_distances(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prototypes: &[ClusterPrototype],
    roles: &ColumnRoles,
) -> Result<DMatrix<f64>> {
    Ok(log_likelihoods(x, y, prototypes, roles)?.map(|l| (-l).exp()))
}

/// `mu_{i,k} = 1 / sum_j (D_{i,k} / D_{j,k})^(2/(m-1))`.
pub fn update_partition(d2: &DMatrix<f64>, m: f64) -> PartitionMatrix {
    update_partition_from_log(&d2.map(|v| -v.ln()), m)
}

/// Same as [`update_partition`] with `ln(1/D^2)` as input: a softmax of
/// `ln(1/D^2) / (m - 1)` over clusters, floored at [`MEMBERSHIP_FLOOR`].
pub fn update_partition_from_log(log_inv_d2: &DMatrix<f64>, m: f64) -> PartitionMatrix {
    partition_and_log_memberships(log_inv_d2, m).0
}

/// The floored partition together with the unfloored `ln(mu)`.
fn partition_and_log_memberships(log_inv_d2: &DMatrix<f64>, m: f64) -> (PartitionMatrix, DMatrix<f64>) {
    let (c, n) = log_inv_d2.shape();
    let scale = 1.0 / (m - 1.0);
    let mut mu = DMatrix::zeros(c, n);
    let mut log_mu = DMatrix::zeros(c, n);
    for k in 0..n {
        let col = log_inv_d2.column(k);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            mu.column_mut(k).fill(1.0 / c as f64);
            log_mu.column_mut(k).fill(-(c as f64).ln());
            continue;
        }
        let log_total = col
            .iter()
            .map(|l| ((l - max) * scale).exp())
            .sum::<f64>()
            .ln();
        let mut floored_total = 0.0;
        for i in 0..c {
            let lm = (col[i] - max) * scale - log_total;
            log_mu[(i, k)] = lm;
            let v = lm.exp().max(MEMBERSHIP_FLOOR);
            mu[(i, k)] = v;
            floored_total += v;
        }
        if floored_total != 1.0 {
            mu.column_mut(k).unscale_mut(floored_total);
        }
    }
    (PartitionMatrix { memberships: mu }, log_mu)
}

/// `J = sum_i sum_k mu_{i,k}^m D^2_{i,k}`.
pub fn objective(partition: &PartitionMatrix, d2: &DMatrix<f64>, m: f64) -> Result<f64> {
    if partition.memberships.shape() != d2.shape() {
        return Err(Error::Shape(format!(
            "partition {:?} vs distances {:?}",
            partition.memberships.shape(),
            d2.shape()
        )));
    }
    Ok(partition
        .memberships
        .iter()
        .zip(d2.iter())
        .map(|(mu, d)| if *mu == 0.0 { 0.0 } else { mu.powf(m) * d })
        .sum())
}

/// [`objective`] evaluated term by term as `exp(m ln mu - ln(1/D^2))`.
fn objective_from_log(log_mu: &DMatrix<f64>, log_inv_d2: &DMatrix<f64>, m: f64) -> f64 {
    log_mu
        .iter()
        .zip(log_inv_d2.iter())
        .map(|(lm, l)| (m * lm - l).exp())
        .sum()
}

/// Random memberships, each column normalized to one. Deterministic in `seed`.
pub fn init_partition(samples: usize, clusters: usize, seed: u64) -> Result<PartitionMatrix> {
    if clusters < 1 {
        return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
    }
    if samples < clusters {
        return Err(Error::InvalidConfig(format!(
            "{samples} samples cannot support {clusters} clusters"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = DMatrix::zeros(clusters, samples);
    for k in 0..samples {
        for i in 0..clusters {
            // (0, 1]
            mu[(i, k)] = 1.0 - rng.random::<f64>();
        }
        let s = mu.column(k).sum();
        mu.column_mut(k).unscale_mut(s);
    }
    Ok(PartitionMatrix { memberships: mu })
}

/// Events recorded during a clustering run, keyed by 1-based iteration.
/// Iteration `iterations + 1` is the final prototype refit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusteringDiagnostics {
    pub reseeded: Vec<(usize, usize)>,
    pub rank_deficient: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Prototypes refitted on the final partition.
    pub prototypes: Vec<ClusterPrototype>,
    pub partition: PartitionMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub roles: ColumnRoles,
    pub diagnostics: ClusteringDiagnostics,
}

/// Runs the alternating optimization from a seeded random partition.
pub fn cluster(
    data: &Dataset,
    config: &ClusteringConfig,
    roles: &ColumnRoles,
) -> Result<ClusteringResult> {
    config.validate()?;
    let initial = init_partition(data.len(), config.cluster_count, config.seed)?;
    cluster_from_partition(data, config, roles, initial)
}

/// Runs the alternating optimization from a caller-supplied partition.
pub fn cluster_from_partition(
    data: &Dataset,
    config: &ClusteringConfig,
    roles: &ColumnRoles,
    initial: PartitionMatrix,
) -> Result<ClusteringResult> {
    cluster_observed(data, config, roles, initial, |_| {})
}

/// [`cluster_from_partition`] that hands every intermediate partition to
/// `observe`, in iteration order.
pub fn cluster_observed(
    data: &Dataset,
    config: &ClusteringConfig,
    roles: &ColumnRoles,
    initial: PartitionMatrix,
    mut observe: impl FnMut(&PartitionMatrix),
) -> Result<ClusteringResult> {
    config.validate()?;
    roles.validate(data.width())?;
    if initial.cluster_count() != config.cluster_count || initial.sample_count() != data.len() {
        return Err(Error::Shape(format!(
            "initial partition is {}x{}, expected {}x{}",
            initial.cluster_count(),
            initial.sample_count(),
            config.cluster_count,
            data.len()
        )));
    }
    if data.len() < config.cluster_count {
        return Err(Error::InvalidConfig(format!(
            "{} samples cannot support {} clusters",
            data.len(),
            config.cluster_count
        )));
    }
    let x = data.descriptors();
    let y = data.activity();
    let m = config.fuzziness;

    let mut partition = initial;
    let mut trace = Vec::new();
    let mut diagnostics = ClusteringDiagnostics::default();
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=config.max_iterations {
        let update = update_prototypes(x, y, &partition, config, roles)?;
        diagnostics
            .reseeded
            .extend(update.reseeded.iter().map(|&i| (iteration, i)));
        diagnostics
            .rank_deficient
            .extend(update.rank_deficient.iter().map(|&i| (iteration, i)));

        let ll = log_likelihoods(x, y, &update.prototypes, roles)?;
        let (next, log_mu) = partition_and_log_memberships(&ll, m);
        trace.push(objective_from_log(&log_mu, &ll, m));
        observe(&next);

        let change = next.max_abs_diff(&partition);
        partition = next;
        iterations = iteration;
        if change < config.tolerance {
            converged = true;
            break;
        }
    }

    let final_update = update_prototypes(x, y, &partition, config, roles)?;
    diagnostics
        .reseeded
        .extend(final_update.reseeded.iter().map(|&i| (iterations + 1, i)));
    diagnostics
        .rank_deficient
        .extend(final_update.rank_deficient.iter().map(|&i| (iterations + 1, i)));

    Ok(ClusteringResult {
        prototypes: final_update.prototypes,
        partition,
        iterations,
        converged,
        objective_trace: trace,
        roles: roles.clone(),
        diagnostics,
    })
}

impl ClusteringResult {
    /// One rule per cluster: antecedent from center/variances, consequent
    /// from theta, weight from the rule weight.
    pub fn to_ts_model(&self, input_names: &[String], centering: &Centering) -> Result<TsModel> {
        let rules = self
            .prototypes
            .iter()
            .map(|p| {
                Rule::new(
                    GaussianAntecedent::new(p.center.clone(), p.variances.clone())?,
                    LocalLinearModel::from_theta(&p.theta),
                    p.rule_weight,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        TsModel::new(
            rules,
            input_names.to_vec(),
            self.roles.antecedent.clone(),
            self.roles.consequent.clone(),
            centering.clone(),
        )
    }

    /// Fuzzy-mean output of the prototypes on (centered) training rows,
    /// computed directly from the cluster parameters.
    pub fn fitted_values(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.nrows(),
            (0..x.nrows()).map(|k| {
                let xa = gather_row(x, k, &self.roles.antecedent);
                let phi = gather_row(x, k, &self.roles.consequent);
                let logs: Vec<f64> = self
                    .prototypes
                    .iter()
                    .map(|p| {
                        p.rule_weight.ln()
                            + p.center
                                .iter()
                                .zip(&p.variances)
                                .zip(&xa)
                                .map(|((v, s2), xi)| -(xi - v).powi(2) / (2.0 * s2))
                                .sum::<f64>()
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (num, den) = self.prototypes.iter().zip(&logs).fold(
                    (0.0, 0.0),
                    |(num, den), (p, l)| {
                        let b = (l - top).exp();
                        (num + b * p.local_output(&phi), den + b)
                    },
                );
                num / den
            }),
        )
    }
}
