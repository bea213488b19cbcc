use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use super::{EmbeddingSet, SearchError};

/// Principal axes fitted on one embedding set.
///
/// Points map to `components · x`, without subtracting the mean: the basis is
/// orthonormal, so at full dimension cosine scores are unchanged, and a
/// reduced point reconstructs as `componentsᵀ y + (mean - componentsᵀ components mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `target_dim x dim`, rows ordered by descending explained variance.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

impl PcaModel {
    pub fn fit(set: &EmbeddingSet, target_dim: usize) -> Result<PcaModel, SearchError> {
        let (n, d) = set.vectors().dim();
        let max = d.min(n);
        if target_dim == 0 || target_dim > max {
            return Err(SearchError::TargetDimTooLarge {
                target: target_dim,
                max,
            });
        }
        let mean = set.vectors().mean_axis(Axis(0)).expect("non-empty set");
        let centered = set.vectors() - &mean;
        let cov = centered.t().dot(&centered) / (n.max(2) - 1) as f64;
        let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

        let mut components = Array2::zeros((target_dim, d));
        let mut variance = Array1::zeros(target_dim);
        for (k, &col) in order.iter().take(target_dim).enumerate() {
            let v = eig.eigenvectors.column(col);
            // Sign convention: the largest-magnitude entry is positive.
            let pivot = (0..d)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
                .expect("d >= 1");
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[[k, j]] = sign * v[j];
            }
            variance[k] = eig.eigenvalues[col].max(0.0);
        }
        let ratio = if total > 0.0 {
            &variance / total
        } else {
            Array1::zeros(target_dim)
        };
        Ok(PcaModel {
            mean,
            components,
            explained_variance: variance,
            explained_variance_ratio: ratio,
        })
    }

    pub fn target_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, set: &EmbeddingSet) -> Result<EmbeddingSet, SearchError> {
        if set.dim() != self.components.ncols() {
            return Err(SearchError::DimMismatch {
                left: set.dim(),
                right: self.components.ncols(),
            });
        }
        let reduced = set.vectors().dot(&self.components.t());
        EmbeddingSet::new(set.ids().to_vec(), reduced, set.source())
    }

    /// Maps reduced rows back to the original space.
    pub fn reconstruct(&self, reduced: &Array2<f64>) -> Array2<f64> {
        let offset = &self.mean - &self.components.t().dot(&self.components.dot(&self.mean));
        reduced.dot(&self.components) + &offset
    }
}

/// Fits on `set` and returns its reduced copy with the model, which is then
/// applied unchanged to the query side.
pub fn pca_reduce(set: &EmbeddingSet, target_dim: usize) -> Result<(EmbeddingSet, PcaModel), SearchError> {
    let model = PcaModel::fit(set, target_dim)?;
    Ok((model.transform(set)?, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::EmbeddingSource;
    use ndarray::array;

    fn set(v: Array2<f64>) -> EmbeddingSet {
        let ids = (0..v.nrows()).map(|i| format!("p{i}")).collect();
        EmbeddingSet::new(ids, v, EmbeddingSource::ExternalOriginal).unwrap()
    }

    #[test]
    fn points_on_a_line() {
        let s = set(array![[1.0, 3.0], [2.0, 5.0], [3.0, 7.0], [-1.0, -1.0]]);
        let (reduced, model) = pca_reduce(&s, 1).unwrap();
        assert!((model.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        let back = model.reconstruct(reduced.vectors());
        for (a, b) in back.iter().zip(s.vectors()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn target_dim_bounds() {
        let s = set(array![[1.0, 2.0, 3.0], [0.0, 1.0, 0.5]]);
        assert!(matches!(
            pca_reduce(&s, 3),
            Err(SearchError::TargetDimTooLarge { target: 3, max: 2 })
        ));
        assert!(pca_reduce(&s, 0).is_err());
        // Rank 1 data, two components: the second carries no variance.
        let (_, m) = pca_reduce(&s, 2).unwrap();
        assert_eq!(m.explained_variance[1], 0.0);
    }

    #[test]
    fn full_dimension_preserves_distances() {
        let s = set(array![
            [1.0, 0.0, 2.0],
            [0.5, -1.0, 0.0],
            [3.0, 2.0, 1.0],
            [0.0, 0.0, -2.0]
        ]);
        let (r, _) = pca_reduce(&s, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d0 = (&s.row(i) - &s.row(j)).mapv(|x| x * x).sum().sqrt();
                let d1 = (&r.row(i) - &r.row(j)).mapv(|x| x * x).sum().sqrt();
                assert!((d0 - d1).abs() < 1e-8);
            }
        }
    }
}
