use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::geom::PointCloud;
use crate::{Error, Result};

/// Rows of the descriptor matrix: centroid distance, mean/min/max k-NN
/// distance, then the local covariance eigenvalues in descending order.
pub const DESCRIPTOR_DIM: usize = 7;

/// Rigid-invariant per-point descriptors, one column per point (`7 × N`).
///
/// The local covariance is taken over the point and its `k` nearest
/// neighbours (ties to the lower index), normalized by `k + 1`.
pub fn point_descriptors(x: &PointCloud, k: usize) -> Result<DMatrix<f64>> {
    let n = x.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "knn k = {k} must be in 1..{n}"
        )));
    }
    let centroid = x.centroid();
    let mut out = DMatrix::zeros(DESCRIPTOR_DIM, n);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, p) in x.iter().enumerate() {
        dist.clear();
        dist.extend(
            x.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| ((p - q).norm(), j)),
        );
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nn = &mut dist[..k];
        nn.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mean_d = nn.iter().map(|d| d.0).sum::<f64>() / k as f64;
        let min_d = nn[0].0;
        let max_d = nn[k - 1].0;

        let local_mean = (nn.iter().map(|&(_, j)| x[j]).sum::<Vector3<f64>>() + p) / (k + 1) as f64;
        let mut cov = (p - local_mean) * (p - local_mean).transpose();
        for &(_, j) in nn.iter() {
            let d = x[j] - local_mean;
            cov += d * d.transpose();
        }
        cov /= (k + 1) as f64;
        let eig = sorted_eigenvalues(&cov);

        let col = [
            (p - centroid).norm(),
            mean_d,
            min_d,
            max_d,
            eig[0],
            eig[1],
            eig[2],
        ];
        out.column_mut(i).copy_from_slice(&col);
    }
    Ok(out)
}

fn sorted_eigenvalues(cov: &Matrix3<f64>) -> [f64; 3] {
    let e = cov.symmetric_eigenvalues();
    let mut v = [e[0].max(0.0), e[1].max(0.0), e[2].max(0.0)];
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
