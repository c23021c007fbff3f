//! Model reduction.
//!
//! Consequent columns are ranked by error-reduction ratios: the
//! membership-weighted regressors of each local model are orthogonalized and
//! every orthogonal direction is credited with the share of the weighted
//! output energy it explains. Antecedent columns are removed one at a time
//! by backward elimination on `det(F_B) / det(F_W)`, the ratio of between-
//! and within-cluster scatter.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::clustering::{extended_regressors, ClusterPrototype, ClusteringResult};
use crate::error::{Error, Result};

/// Columns whose orthogonal residual is below this fraction of their
/// original norm are treated as linearly dependent.
const DEPENDENT_COLUMN: f64 = 1e-10;

/// `B = W A` with mutually orthogonal columns in `W` and unit upper
/// triangular `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsDecomposition {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Columns of `B` that were (numerically) spanned by earlier columns.
    /// Their `W` column is zero and their `A` row is the identity row.
    pub dependent_columns: Vec<usize>,
}

impl OlsDecomposition {
    /// Coefficients `g` of `target` on the orthogonal basis:
    /// `g_j = W_j^T t / W_j^T W_j`, zero for dependent columns.
    pub fn coefficients(&self, target: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.w.ncols(),
            self.w.column_iter().map(|wj| {
                let energy = wj.norm_squared();
                if energy == 0.0 {
                    0.0
                } else {
                    wj.dot(target) / energy
                }
            }),
        )
    }
}

/// Gram-Schmidt in modified (sequential projection) order with one
/// re-orthogonalization pass.
pub fn gram_schmidt(b: &DMatrix<f64>) -> Result<OlsDecomposition> {
    let (n, p) = b.shape();
    if p == 0 || n < p {
        return Err(Error::Shape(format!(
            "Gram-Schmidt needs 1 <= columns <= rows, got {n}x{p}"
        )));
    }
    let mut w = b.clone();
    let mut a = DMatrix::<f64>::identity(p, p);
    let mut dependent = Vec::new();
    let mut energies = vec![0.0; p];

    for j in 0..p {
        let original = b.column(j).norm();
        for _pass in 0..2 {
            for i in 0..j {
                if energies[i] == 0.0 {
                    continue;
                }
                let coef = w.column(i).dot(&w.column(j)) / energies[i];
                a[(i, j)] += coef;
                let wi = w.column(i).into_owned();
                w.column_mut(j).axpy(-coef, &wi, 1.0);
            }
        }
        let residual = w.column(j).norm();
        if original == 0.0 || residual <= DEPENDENT_COLUMN * original {
            w.column_mut(j).fill(0.0);
            dependent.push(j);
        } else {
            energies[j] = residual * residual;
        }
    }
    Ok(OlsDecomposition {
        w,
        a,
        dependent_columns: dependent,
    })
}

/// Error-reduction ratio of every column of `phi_e` for one local model.
///
/// Regressors and target are scaled by `sqrt(weights)` (the diagonal of the
/// cluster's weighting matrix) before orthogonalization, so
/// `q_j = g_j^2 W_j^T W_j / (y_w^T y_w)`. Columns are orthogonalized in the
/// given order; ratios are returned in that order.
pub fn ols_rank_consequents(
    phi_e: &DMatrix<f64>,
    weights: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<Vec<f64>> {
    let n = phi_e.nrows();
    if weights.len() != n || y.len() != n {
        return Err(Error::Shape(format!(
            "regressors have {n} rows, weights {} and targets {}",
            weights.len(),
            y.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be non-negative".into()));
    }
    let sqrt_w = weights.map(f64::sqrt);
    let mut b = phi_e.clone();
    for (r, s) in sqrt_w.iter().enumerate() {
        b.row_mut(r).scale_mut(*s);
    }
    let target = y.component_mul(&sqrt_w);
    let energy = target.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::UndefinedRatios);
    }
    let ols = gram_schmidt(&b)?;
    let g = ols.coefficients(&target);
    Ok(ols
        .w
        .column_iter()
        .zip(g.iter())
        .map(|(wj, gj)| gj * gj * wj.norm_squared() / energy)
        .collect())
}

/// Prior-weighted mean of per-cluster ratios and the resulting order
/// (positions into the ratio columns, best first, ties to the lower index).
pub fn aggregate_ranking(per_cluster: &DMatrix<f64>, priors: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    if per_cluster.nrows() != priors.len() {
        return Err(Error::Shape(format!(
            "{} ratio rows for {} priors",
            per_cluster.nrows(),
            priors.len()
        )));
    }
    let scores: Vec<f64> = per_cluster
        .column_iter()
        .map(|col| col.iter().zip(priors).map(|(q, p)| q * p).sum())
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok((order, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsequentRanking {
    /// Consequent columns the ratios refer to, in regression order.
    pub columns: Vec<usize>,
    /// `c x n_r` error-reduction ratios of the consequent columns.
    pub per_cluster_ratios: DMatrix<f64>,
    /// Ratio credited to the offset column of each local model.
    pub offset_ratios: Vec<f64>,
    /// Consequent column indices, best first.
    pub aggregate_order: Vec<usize>,
    /// Aggregate score per entry of `columns`.
    pub aggregate_scores: Vec<f64>,
}

impl ConsequentRanking {
    /// Score of a column index, if it is a consequent column.
    pub fn score_of(&self, column: usize) -> Option<f64> {
        self.columns
            .iter()
            .position(|&c| c == column)
            .map(|p| self.aggregate_scores[p])
    }
}

/// Ranks the consequent columns of a clustering run. Each cluster's
/// regression uses `mu^m` weights, the same weighting as its local model fit.
pub fn rank_consequents(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    result: &ClusteringResult,
    fuzziness: f64,
) -> Result<ConsequentRanking> {
    let columns = result.roles.consequent.clone();
    let p = columns.len();
    let c = result.prototypes.len();
    let phi_e = extended_regressors(x, &columns);
    let mut ratios = DMatrix::zeros(c, p);
    let mut offset_ratios = Vec::with_capacity(c);
    for i in 0..c {
        let weights = result.partition.memberships().row(i).transpose().map(|mu| mu.powf(fuzziness));
        let q = ols_rank_consequents(&phi_e, &weights, y)?;
        for j in 0..p {
            ratios[(i, j)] = q[j];
        }
        offset_ratios.push(q[p]);
    }
    let priors: Vec<f64> = result.prototypes.iter().map(|pr| pr.prior).collect();
    let (order, scores) = aggregate_ranking(&ratios, &priors)?;
    Ok(ConsequentRanking {
        aggregate_order: order.iter().map(|&pos| columns[pos]).collect(),
        columns,
        per_cluster_ratios: ratios,
        offset_ratios,
        aggregate_scores: scores,
    })
}

/// Scatter matrices of the cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherCovariances {
    /// `F_W = sum_i p_i F_i`
    pub within: DMatrix<f64>,
    /// `F_B = sum_i p_i (V_i - V_0)(V_i - V_0)^T`
    pub between: DMatrix<f64>,
    /// `F_T = F_W + F_B`
    pub total: DMatrix<f64>,
    /// `V_0 = sum_i p_i V_i`
    pub grand_center: DVector<f64>,
}

impl FisherCovariances {
    /// Restriction to the given positions (rows and columns).
    pub fn restrict(&self, keep: &[usize]) -> FisherCovariances {
        let sub = |m: &DMatrix<f64>| m.select_rows(keep).select_columns(keep);
        FisherCovariances {
            within: sub(&self.within),
            between: sub(&self.between),
            total: sub(&self.total),
            grand_center: self.grand_center.select_rows(keep),
        }
    }
}

/// Scatter matrices from arbitrary (symmetric) per-cluster covariances.
pub fn fisher_covariances_from(
    priors: &[f64],
    centers: &[DVector<f64>],
    covariances: &[DMatrix<f64>],
) -> Result<FisherCovariances> {
    let c = priors.len();
    if c == 0 || centers.len() != c || covariances.len() != c {
        return Err(Error::Shape(format!(
            "{} priors, {} centers, {} covariances",
            c,
            centers.len(),
            covariances.len()
        )));
    }
    let n = centers[0].len();
    if centers.iter().any(|v| v.len() != n) || covariances.iter().any(|f| f.shape() != (n, n)) {
        return Err(Error::Shape("cluster dimensions disagree".into()));
    }
    let mut grand = DVector::zeros(n);
    let mut within = DMatrix::zeros(n, n);
    for ((p, v), f) in priors.iter().zip(centers).zip(covariances) {
        grand.axpy(*p, v, 1.0);
        within += f * *p;
    }
    let mut between = DMatrix::zeros(n, n);
    for (p, v) in priors.iter().zip(centers) {
        let d = v - &grand;
        between += (&d * d.transpose()) * *p;
    }
    Ok(FisherCovariances {
        total: &within + &between,
        within,
        between,
        grand_center: grand,
    })
}

/// Scatter matrices of clustering prototypes, whose covariances are the
/// diagonal antecedent variances.
pub fn fisher_covariances(prototypes: &[ClusterPrototype]) -> Result<FisherCovariances> {
    let priors: Vec<f64> = prototypes.iter().map(|p| p.prior).collect();
    let centers: Vec<DVector<f64>> = prototypes
        .iter()
        .map(|p| DVector::from_column_slice(&p.center))
        .collect();
    let covs: Vec<DMatrix<f64>> = prototypes
        .iter()
        .map(|p| DMatrix::from_diagonal(&DVector::from_column_slice(&p.variances)))
        .collect();
    fisher_covariances_from(&priors, &centers, &covs)
}

/// Cholesky log-determinant; reports the first non-positive pivot.
fn log_det_cholesky(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Singular { dimension: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        log_det += 2.0 * djj.ln();
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(log_det)
}

/// Interclass separability `det(F_B) / det(F_W)`.
///
/// `F_W` is factored by Cholesky; if that fails it is ridged by
/// `1e-10 trace(F_W)/n` and factored again.
/// `F_B` has rank at most `c - 1`; its eigenvalues at or below `1e-12` of the
/// largest one are treated as zero, which makes the score exactly 0.
pub fn fisher_score(between: &DMatrix<f64>, within: &DMatrix<f64>) -> Result<f64> {
    let n = within.nrows();
    if within.shape() != (n, n) || between.shape() != (n, n) || n == 0 {
        return Err(Error::Shape(format!(
            "scatter matrices {:?} and {:?}",
            between.shape(),
            within.shape()
        )));
    }
    let log_det_w = match log_det_cholesky(within) {
        Ok(v) => v,
        Err(_) => {
            let ridge = 1e-10 * within.trace() / n as f64;
            log_det_cholesky(&(within + DMatrix::<f64>::identity(n, n) * ridge))?
        }
    };

    let eig = SymmetricEigen::new(between.clone());
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(largest > 0.0) || eig.eigenvalues.iter().any(|&l| l <= 1e-12 * largest) {
        return Ok(0.0);
    }
    let log_det_b: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    Ok((log_det_b - log_det_w).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherTrace {
    /// Antecedent column indices in removal order.
    pub elimination_order: Vec<usize>,
    /// Score of the remaining set after each removal.
    pub scores_after_removal: Vec<f64>,
    /// Antecedent column indices that survive, in their original order.
    pub kept: Vec<usize>,
    /// Scatter matrices over all antecedent columns.
    pub full: FisherCovariances,
}

/// Backward elimination: repeatedly drop the antecedent whose removal
/// leaves the highest score, until `keep` remain. Scatter matrices are taken
/// from the fixed clustering; only rows/columns are deleted.
pub fn rank_antecedents(
    prototypes: &[ClusterPrototype],
    antecedent_columns: &[usize],
    keep: usize,
) -> Result<FisherTrace> {
    let n = antecedent_columns.len();
    if keep < 1 || keep > n {
        return Err(Error::InvalidConfig(format!(
            "cannot keep {keep} of {n} antecedent columns"
        )));
    }
    let full = fisher_covariances(prototypes)?;
    if full.within.nrows() != n {
        return Err(Error::Shape(format!(
            "prototypes have {} antecedent dimensions, {} columns given",
            full.within.nrows(),
            n
        )));
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::new();
    let mut scores = Vec::new();
    while remaining.len() > keep {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &pos) in remaining.iter().enumerate() {
            let sub: Vec<usize> = remaining.iter().copied().filter(|&r| r != pos).collect();
            let reduced = full.restrict(&sub);
            let score = fisher_score(&reduced.between, &reduced.within)?;
            let better = match best {
                None => true,
                Some((b, bs)) => {
                    score > bs
                        || (score == bs && antecedent_columns[pos] < antecedent_columns[remaining[b]])
                }
            };
            if better {
                best = Some((slot, score));
            }
        }
        let (slot, score) = best.expect("at least two remaining");
        order.push(antecedent_columns[remaining.remove(slot)]);
        scores.push(score);
    }
    Ok(FisherTrace {
        elimination_order: order,
        scores_after_removal: scores,
        kept: remaining.iter().map(|&p| antecedent_columns[p]).collect(),
        full,
    })
}

/// Outcome of a full reduction pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub consequent: ConsequentRanking,
    pub antecedent: FisherTrace,
    /// Consequent columns kept, ascending.
    pub kept_consequents: Vec<usize>,
    /// Antecedent columns kept, ascending.
    pub kept_antecedents: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_identity() {
        let b = DMatrix::<f64>::identity(2, 2);
        let d = gram_schmidt(&b).unwrap();
        assert_eq!(d.w, b);
        assert_eq!(d.a, b);
        assert!(d.dependent_columns.is_empty());
    }

    #[test]
    fn gram_schmidt_duplicate_columns() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -0.5, -0.5]);
        let d = gram_schmidt(&b).unwrap();
        assert!(d.w.column(1).norm() <= 1e-8 * d.w.column(0).norm());
        assert_eq!(d.dependent_columns, vec![1]);
        assert!(((&d.w * &d.a) - &b).norm() <= 1e-12);
        assert_eq!(d.a[(1, 1)], 1.0);
    }

    #[test]
    fn gram_schmidt_rejects_wide() {
        assert!(gram_schmidt(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn ratios_exact_fit_sum_to_one() {
        let phi_e = DMatrix::from_row_slice(
            5,
            3,
            &[0.3, 1.0, 1.0, -1.2, 0.5, 1.0, 2.0, -0.7, 1.0, 0.1, 0.9, 1.0, -0.4, -2.0, 1.0],
        );
        let theta = DVector::from_vec(vec![1.5, -0.5, 0.25]);
        let y = &phi_e * theta;
        let q = ols_rank_consequents(&phi_e, &DVector::from_element(5, 1.0), &y).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(q.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn ratios_orthogonal_target() {
        let phi_e = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 3.0, 2.0]);
        let q = ols_rank_consequents(&phi_e, &DVector::from_element(4, 1.0), &y).unwrap();
        assert!(q[0] <= 1e-12);
    }

    #[test]
    fn ratio_of_perfect_single_regressor() {
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let phi_e = DMatrix::from_column_slice(3, 1, y.as_slice());
        let q = ols_rank_consequents(&phi_e, &DVector::from_element(3, 1.0), &y).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratios_need_output_energy() {
        let phi_e = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(
            ols_rank_consequents(&phi_e, &DVector::from_element(3, 1.0), &DVector::zeros(3)),
            Err(Error::UndefinedRatios)
        ));
    }

    #[test]
    fn aggregate_cases() {
        let one = DMatrix::from_row_slice(1, 3, &[0.1, 0.6, 0.3]);
        assert_eq!(aggregate_ranking(&one, &[1.0]).unwrap().0, vec![1, 2, 0]);

        let same = DMatrix::from_row_slice(2, 3, &[0.1, 0.6, 0.3, 0.1, 0.6, 0.3]);
        assert_eq!(aggregate_ranking(&same, &[0.3, 0.7]).unwrap().0, vec![1, 2, 0]);

        let two = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.1, 0.8]);
        let (order, scores) = aggregate_ranking(&two, &[0.5, 0.5]).unwrap();
        assert!((scores[0] - 0.4).abs() < 1e-15 && (scores[1] - 0.5).abs() < 1e-15);
        assert_eq!(order, vec![1, 0]);

        let tie = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert_eq!(aggregate_ranking(&tie, &[1.0]).unwrap().0, vec![0, 1]);
    }

    fn proto(center: Vec<f64>, variances: Vec<f64>, prior: f64) -> ClusterPrototype {
        let nr = center.len();
        ClusterPrototype {
            center,
            variances,
            theta: vec![0.0; nr + 1],
            model_error_variance: 1.0,
            prior,
            rule_weight: 1.0,
        }
    }

    #[test]
    fn single_cluster_scatter() {
        let f = fisher_covariances(&[proto(vec![1.0, -2.0], vec![0.5, 2.0], 1.0)]).unwrap();
        assert_eq!(f.between, DMatrix::zeros(2, 2));
        assert_eq!(f.grand_center.as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn two_cluster_scatter() {
        let f = fisher_covariances(&[
            proto(vec![1.0, 0.0], vec![1.0, 1.0], 0.5),
            proto(vec![-1.0, 0.0], vec![1.0, 1.0], 0.5),
        ])
        .unwrap();
        assert_eq!(f.within, DMatrix::identity(2, 2));
        assert_eq!(f.between, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(f.grand_center.as_slice(), &[0.0, 0.0]);
        assert_eq!(f.total.trace(), f.within.trace() + f.between.trace());
    }

    #[test]
    fn score_cases() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(fisher_score(&DMatrix::zeros(2, 2), &w).unwrap(), 0.0);
        assert!((fisher_score(&w, &w).unwrap() - 1.0).abs() < 1e-9);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert!((fisher_score(&b, &w).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn singular_within_reports_dimension() {
        let b = DMatrix::identity(2, 2);
        let w = DMatrix::zeros(2, 2);
        assert!(matches!(fisher_score(&b, &w), Err(Error::Singular { dimension: 0 })));
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(fisher_score(&b, &w), Err(Error::Singular { dimension: 1 })));
    }

    #[test]
    fn nothing_to_eliminate_in_one_dimension() {
        let t = rank_antecedents(
            &[proto(vec![1.0], vec![1.0], 0.5), proto(vec![-1.0], vec![1.0], 0.5)],
            &[0],
            1,
        )
        .unwrap();
        assert!(t.elimination_order.is_empty());
        assert_eq!(t.kept, vec![0]);
        assert!(rank_antecedents(&[proto(vec![1.0], vec![1.0], 1.0)], &[0], 0).is_err());
        assert!(rank_antecedents(&[proto(vec![1.0], vec![1.0], 1.0)], &[0], 2).is_err());
    }

    #[test]
    fn noise_dimension_goes_first() {
        // Dimension 1 carries no between-cluster separation.
        let protos = [
            proto(vec![0.0, 0.3, 0.0], vec![0.2, 1.0, 0.3], 0.3),
            proto(vec![2.0, 0.3, 0.5], vec![0.3, 1.2, 0.2], 0.3),
            proto(vec![0.5, 0.3, 2.0], vec![0.25, 0.9, 0.4], 0.4),
        ];
        let t = rank_antecedents(&protos, &[4, 7, 9], 1).unwrap();
        assert_eq!(t.elimination_order[0], 7);
        assert_eq!(t.elimination_order.len(), 2);
        assert_eq!(t.kept.len(), 1);
    }

    #[test]
    fn duplicate_dimension_goes_before_informative() {
        // Columns 0 and 1 are copies; column 2 is independent.
        let protos = [
            proto(vec![0.0, 0.0, 0.0], vec![0.2, 0.2, 0.3], 0.3),
            proto(vec![2.0, 2.0, 0.5], vec![0.3, 0.3, 0.2], 0.3),
            proto(vec![0.5, 0.5, 2.0], vec![0.25, 0.25, 0.4], 0.4),
        ];
        let t = rank_antecedents(&protos, &[0, 1, 2], 2).unwrap();
        assert!(t.elimination_order[0] == 0 || t.elimination_order[0] == 1);
        assert!(t.kept.contains(&2));
    }
}
