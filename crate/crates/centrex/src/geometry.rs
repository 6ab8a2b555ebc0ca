//! Covariance models and Mahalanobis norms shared by every algorithm.
//!
//! The theory restricts covariances to families that are simultaneously
//! diagonalizable: scaled identities, diagonals, and `R D R^T` forms with one
//! common orthogonal `R` across the whole dataset. Full SPD matrices are
//! therefore only representable through [`CovarianceModel::SharedEigenbasis`],
//! which makes the common-basis assumption checkable at construction instead
//! of being an implicit caller obligation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An orthogonal matrix, stored row-major. Validated once at construction
/// (`max |R^T R - I| <= 1e-10`), then trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    m: Vec<f64>,
}

impl Rotation {
    pub const ORTHO_TOL: f64 = 1e-10;

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Rotation { dim, m }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Empty("rotation matrix"));
        }
        let mut m = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("rotation matrix entries must be finite".into()));
            }
            m.extend_from_slice(row);
        }
        let r = Rotation { dim, m };
        r.check_orthogonal()?;
        Ok(r)
    }

    fn check_orthogonal(&self) -> Result<()> {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                // (R^T R)_{ij} = column_i . column_j
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.m[k * d + i] * self.m[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                if (acc - target).abs() > Self::ORTHO_TOL {
                    return Err(Error::Domain(format!(
                        "matrix is not orthogonal: |(R^T R - I)[{i}][{j}]| = {:.3e}",
                        (acc - target).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        let d = self.dim;
        self.m
            .iter()
            .enumerate()
            .all(|(idx, &v)| v == if idx / d == idx % d { 1.0 } else { 0.0 })
    }

    /// R x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.m[i * d..(i + 1) * d];
                row.iter().zip(x).map(|(r, v)| r * v).sum()
            })
            .collect()
    }

    /// R^T x
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (k, &xk) in x.iter().enumerate() {
            let row = &self.m[k * d..(k + 1) * d];
            for i in 0..d {
                out[i] += row[i] * xk;
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.m[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }
}

/// One covariance matrix in a simultaneously-diagonalizable family.
#[derive(Debug, Clone)]
pub enum CovarianceModel {
    /// sigma^2 * I
    ScaledIdentity(f64),
    /// diag(lambda^2_1 .. lambda^2_d)
    Diagonal(Vec<f64>),
    /// R diag(delta) R^T with a shared orthogonal basis
    SharedEigenbasis { rotation: Arc<Rotation>, delta: Vec<f64> },
}

impl CovarianceModel {
    pub fn scaled_identity(sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::Domain(format!("variance must be positive, got {sigma2}")));
        }
        Ok(CovarianceModel::ScaledIdentity(sigma2))
    }

    pub fn diagonal(lambda2: Vec<f64>) -> Result<Self> {
        if lambda2.is_empty() {
            return Err(Error::Empty("diagonal covariance"));
        }
        if lambda2.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Domain("diagonal covariance entries must be positive".into()));
        }
        Ok(CovarianceModel::Diagonal(lambda2))
    }

    pub fn shared_eigenbasis(rotation: Arc<Rotation>, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != rotation.dim() {
            return Err(Error::DimensionMismatch { expected: rotation.dim(), got: delta.len() });
        }
        if delta.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Domain("eigenvalue entries must be positive".into()));
        }
        Ok(CovarianceModel::SharedEigenbasis { rotation, delta })
    }

    /// Dimension pinned by the model, if any (a scaled identity fits all).
    pub fn dim(&self) -> Option<usize> {
        match self {
            CovarianceModel::ScaledIdentity(_) => None,
            CovarianceModel::Diagonal(l) => Some(l.len()),
            CovarianceModel::SharedEigenbasis { delta, .. } => Some(delta.len()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            CovarianceModel::ScaledIdentity(s2) => {
                if !s2.is_finite() || *s2 <= 0.0 {
                    return Err(Error::Domain(format!("variance must be positive, got {s2}")));
                }
            }
            CovarianceModel::Diagonal(l) => {
                if l.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: l.len() });
                }
                if l.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::Domain("diagonal covariance entries must be positive".into()));
                }
            }
            CovarianceModel::SharedEigenbasis { rotation, delta } => {
                if rotation.dim() != dim || delta.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: delta.len() });
                }
                if delta.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::Domain("eigenvalue entries must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// The model scaled by a positive factor (the covariance `factor * S`).
    pub fn scale(&self, factor: f64) -> Result<CovarianceModel> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        Ok(match self {
            CovarianceModel::ScaledIdentity(s2) => CovarianceModel::ScaledIdentity(s2 * factor),
            CovarianceModel::Diagonal(l) => {
                CovarianceModel::Diagonal(l.iter().map(|v| v * factor).collect())
            }
            CovarianceModel::SharedEigenbasis { rotation, delta } => {
                CovarianceModel::SharedEigenbasis {
                    rotation: rotation.clone(),
                    delta: delta.iter().map(|v| v * factor).collect(),
                }
            }
        })
    }

    /// Sum of two models from the same family (used by the init-boosted first
    /// iteration, where every covariance is inflated by the initializer's).
    pub fn add(&self, other: &CovarianceModel) -> Result<CovarianceModel> {
        use CovarianceModel::*;
        match (self, other) {
            (ScaledIdentity(a), ScaledIdentity(b)) => Ok(ScaledIdentity(a + b)),
            (ScaledIdentity(s), Diagonal(l)) | (Diagonal(l), ScaledIdentity(s)) => {
                Ok(Diagonal(l.iter().map(|v| v + s).collect()))
            }
            (Diagonal(a), Diagonal(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
                }
                Ok(Diagonal(a.iter().zip(b).map(|(x, y)| x + y).collect()))
            }
            (SharedEigenbasis { rotation, delta }, ScaledIdentity(s))
            | (ScaledIdentity(s), SharedEigenbasis { rotation, delta }) => Ok(SharedEigenbasis {
                rotation: rotation.clone(),
                delta: delta.iter().map(|v| v + s).collect(),
            }),
            (
                SharedEigenbasis { rotation: r1, delta: d1 },
                SharedEigenbasis { rotation: r2, delta: d2 },
            ) => {
                if !same_rotation(r1, r2) {
                    return Err(Error::Domain("cannot add covariances with different eigenbases".into()));
                }
                Ok(SharedEigenbasis {
                    rotation: r1.clone(),
                    delta: d1.iter().zip(d2).map(|(x, y)| x + y).collect(),
                })
            }
            _ => Err(Error::Domain("cannot add a diagonal covariance to a rotated one".into())),
        }
    }
}

fn same_rotation(a: &Arc<Rotation>, b: &Arc<Rotation>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Squared Mahalanobis norm x^T S^{-1} x.
pub fn mahalanobis_sq(x: &[f64], cov: &CovarianceModel) -> Result<f64> {
    if let Some(d) = cov.dim() {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
    }
    Ok(match cov {
        CovarianceModel::ScaledIdentity(s2) => x.iter().map(|v| v * v).sum::<f64>() / s2,
        CovarianceModel::Diagonal(l) => maha_sq_diag(x, l),
        CovarianceModel::SharedEigenbasis { rotation, delta } => {
            maha_sq_diag(&rotation.apply_transpose(x), delta)
        }
    })
}

pub(crate) fn maha_sq_diag(x: &[f64], lambda2: &[f64]) -> f64 {
    x.iter().zip(lambda2).map(|(v, l)| v * v / l).sum()
}

pub(crate) fn euclid_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A fixed collection of measurement vectors with a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return Err(Error::Empty("dataset")),
        };
        if dim == 0 {
            return Err(Error::Empty("dataset row"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite coordinate in point {i}")));
            }
        }
        Ok(Dataset { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Covariances for a whole dataset: one shared model, or one model per point
/// with any rotated entries constrained to a single common eigenbasis.
#[derive(Debug, Clone)]
pub enum DatasetCovariances {
    Shared(CovarianceModel),
    PerPoint(Vec<CovarianceModel>),
}

impl DatasetCovariances {
    pub fn shared(model: CovarianceModel) -> Self {
        DatasetCovariances::Shared(model)
    }

    pub fn per_point(models: Vec<CovarianceModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty("covariance list"));
        }
        let mut rotation: Option<&Arc<Rotation>> = None;
        let mut has_plain_diagonal = false;
        let mut dim: Option<usize> = None;
        for m in &models {
            if let Some(d) = m.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(d0) if d0 != d => {
                        return Err(Error::DimensionMismatch { expected: d0, got: d })
                    }
                    _ => {}
                }
            }
            match m {
                CovarianceModel::Diagonal(_) => has_plain_diagonal = true,
                CovarianceModel::SharedEigenbasis { rotation: r, .. } => match rotation {
                    None => rotation = Some(r),
                    Some(r0) => {
                        if !same_rotation(r0, r) {
                            return Err(Error::Domain(
                                "per-point covariances must share a single eigenbasis".into(),
                            ));
                        }
                    }
                },
                CovarianceModel::ScaledIdentity(_) => {}
            }
        }
        if let Some(r) = rotation {
            if has_plain_diagonal && !r.is_identity() {
                return Err(Error::Domain(
                    "cannot mix plain diagonal covariances with a non-identity eigenbasis".into(),
                ));
            }
        }
        Ok(DatasetCovariances::PerPoint(models))
    }

    pub fn model(&self, n: usize) -> &CovarianceModel {
        match self {
            DatasetCovariances::Shared(m) => m,
            DatasetCovariances::PerPoint(ms) => &ms[n],
        }
    }

    /// The common eigenbasis rotation, if any model carries one.
    pub fn rotation(&self) -> Option<&Arc<Rotation>> {
        match self {
            DatasetCovariances::Shared(CovarianceModel::SharedEigenbasis { rotation, .. }) => {
                Some(rotation)
            }
            DatasetCovariances::PerPoint(ms) => ms.iter().find_map(|m| match m {
                CovarianceModel::SharedEigenbasis { rotation, .. } => Some(rotation),
                _ => None,
            }),
            _ => None,
        }
    }

    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        match self {
            DatasetCovariances::Shared(m) => m.validate(data.dim()),
            DatasetCovariances::PerPoint(ms) => {
                if ms.len() != data.len() {
                    return Err(Error::DimensionMismatch { expected: data.len(), got: ms.len() });
                }
                ms.iter().try_for_each(|m| m.validate(data.dim()))
            }
        }
    }
}

/// Rewrite data and covariances in the common eigenbasis: returns
/// `z_n = R^T y_n`, the corresponding diagonal covariance models, and `R`.
/// With no rotated model present this is the identity transform.
pub fn transform_to_eigenbasis(
    data: &Dataset,
    covs: &DatasetCovariances,
) -> Result<(Dataset, DatasetCovariances, Rotation)> {
    covs.validate_for(data)?;
    let rotation = match covs.rotation() {
        Some(r) => {
            if r.dim() != data.dim() {
                return Err(Error::DimensionMismatch { expected: data.dim(), got: r.dim() });
            }
            r.as_ref().clone()
        }
        None => Rotation::identity(data.dim()),
    };
    let transformed = if rotation.is_identity() {
        data.clone()
    } else {
        Dataset::new(data.points().iter().map(|p| rotation.apply_transpose(p)).collect())?
    };
    let flatten = |m: &CovarianceModel| -> CovarianceModel {
        match m {
            CovarianceModel::SharedEigenbasis { delta, .. } => CovarianceModel::Diagonal(delta.clone()),
            other => other.clone(),
        }
    };
    let diag_covs = match covs {
        DatasetCovariances::Shared(m) => DatasetCovariances::Shared(flatten(m)),
        DatasetCovariances::PerPoint(ms) => {
            DatasetCovariances::PerPoint(ms.iter().map(flatten).collect())
        }
    };
    Ok((transformed, diag_covs, rotation))
}

/// Arithmetic mean of the covariance models, staying within the narrowest
/// structural class that can represent it.
pub fn mean_covariance(covs: &DatasetCovariances) -> Result<CovarianceModel> {
    let models: Vec<&CovarianceModel> = match covs {
        DatasetCovariances::Shared(m) => return Ok(m.clone()),
        DatasetCovariances::PerPoint(ms) => ms.iter().collect(),
    };
    if models.is_empty() {
        return Err(Error::Empty("covariance list"));
    }
    let n = models.len() as f64;
    if models.iter().all(|m| matches!(m, CovarianceModel::ScaledIdentity(_))) {
        let sum: f64 = models
            .iter()
            .map(|m| match m {
                CovarianceModel::ScaledIdentity(s2) => *s2,
                _ => unreachable!(),
            })
            .sum();
        return Ok(CovarianceModel::ScaledIdentity(sum / n));
    }
    let dim = models
        .iter()
        .find_map(|m| m.dim())
        .ok_or_else(|| Error::Domain("cannot infer dimension of covariance mean".into()))?;
    let mut acc = vec![0.0; dim];
    let mut rotation: Option<Arc<Rotation>> = None;
    for m in &models {
        match m {
            CovarianceModel::ScaledIdentity(s2) => acc.iter_mut().for_each(|a| *a += s2),
            CovarianceModel::Diagonal(l) => acc.iter_mut().zip(l).for_each(|(a, v)| *a += v),
            CovarianceModel::SharedEigenbasis { rotation: r, delta } => {
                rotation.get_or_insert_with(|| r.clone());
                acc.iter_mut().zip(delta).for_each(|(a, v)| *a += v);
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(match rotation {
        Some(rotation) => CovarianceModel::SharedEigenbasis { rotation, delta: acc },
        None => CovarianceModel::Diagonal(acc),
    })
}

/// Serializable covariance description, the JSON sidecar schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    ScaledIdentity {
        sigma2: f64,
    },
    Diagonal {
        lambda2: RowsSpec,
    },
    SharedEigenbasis {
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
        delta: RowsSpec,
    },
}

/// One vector (shared across points) or one vector per point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowsSpec {
    One(Vec<f64>),
    PerPoint(Vec<Vec<f64>>),
}

impl CovarianceSpec {
    pub fn to_covariances(&self, n: usize) -> Result<DatasetCovariances> {
        match self {
            CovarianceSpec::ScaledIdentity { sigma2 } => {
                Ok(DatasetCovariances::Shared(CovarianceModel::scaled_identity(*sigma2)?))
            }
            CovarianceSpec::Diagonal { lambda2 } => match lambda2 {
                RowsSpec::One(l) => {
                    Ok(DatasetCovariances::Shared(CovarianceModel::diagonal(l.clone())?))
                }
                RowsSpec::PerPoint(rows) => {
                    if rows.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
                    }
                    DatasetCovariances::per_point(
                        rows.iter().map(|r| CovarianceModel::diagonal(r.clone())).collect::<Result<_>>()?,
                    )
                }
            },
            CovarianceSpec::SharedEigenbasis { r, delta } => {
                let rotation = Arc::new(Rotation::from_rows(r.clone())?);
                match delta {
                    RowsSpec::One(d) => Ok(DatasetCovariances::Shared(
                        CovarianceModel::shared_eigenbasis(rotation, d.clone())?,
                    )),
                    RowsSpec::PerPoint(rows) => {
                        if rows.len() != n {
                            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
                        }
                        DatasetCovariances::per_point(
                            rows.iter()
                                .map(|d| CovarianceModel::shared_eigenbasis(rotation.clone(), d.clone()))
                                .collect::<Result<_>>()?,
                        )
                    }
                }
            }
        }
    }

    pub fn from_covariances(covs: &DatasetCovariances) -> Result<Self> {
        let spec = match covs {
            DatasetCovariances::Shared(m) => match m {
                CovarianceModel::ScaledIdentity(s2) => CovarianceSpec::ScaledIdentity { sigma2: *s2 },
                CovarianceModel::Diagonal(l) => {
                    CovarianceSpec::Diagonal { lambda2: RowsSpec::One(l.clone()) }
                }
                CovarianceModel::SharedEigenbasis { rotation, delta } => CovarianceSpec::SharedEigenbasis {
                    r: rotation.rows(),
                    delta: RowsSpec::One(delta.clone()),
                },
            },
            DatasetCovariances::PerPoint(ms) => {
                let dim = ms
                    .iter()
                    .find_map(|m| m.dim())
                    .ok_or_else(|| Error::Domain("cannot serialize dimensionless covariances".into()))?;
                let rotation = covs.rotation();
                let rows: Vec<Vec<f64>> = ms
                    .iter()
                    .map(|m| match m {
                        CovarianceModel::ScaledIdentity(s2) => vec![*s2; dim],
                        CovarianceModel::Diagonal(l) => l.clone(),
                        CovarianceModel::SharedEigenbasis { delta, .. } => delta.clone(),
                    })
                    .collect();
                match rotation {
                    Some(r) if !r.is_identity() => CovarianceSpec::SharedEigenbasis {
                        r: r.rows(),
                        delta: RowsSpec::PerPoint(rows),
                    },
                    _ => CovarianceSpec::Diagonal { lambda2: RowsSpec::PerPoint(rows) },
                }
            }
        };
        Ok(spec)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;

    /// Random orthogonal matrix from a product of Givens rotations.
    pub(crate) fn random_rotation(dim: usize, rng: &mut impl Rng) -> Rotation {
        let mut r = Rotation::identity(dim);
        for _ in 0..(2 * dim * dim) {
            let i = rng.gen_range(0..dim);
            let mut j = rng.gen_range(0..dim);
            if i == j {
                j = (j + 1) % dim;
            }
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            for k in 0..dim {
                let a = r.m[i * dim + k];
                let b = r.m[j * dim + k];
                r.m[i * dim + k] = c * a - s * b;
                r.m[j * dim + k] = s * a + c * b;
            }
        }
        r
    }

    fn rot45() -> Rotation {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Rotation::from_rows(vec![vec![c, -c], vec![c, c]]).unwrap()
    }

    #[test]
    fn mahalanobis_scaled_identity_is_euclidean() {
        let m = CovarianceModel::ScaledIdentity(1.0);
        assert_eq!(mahalanobis_sq(&[3.0, 4.0], &m).unwrap(), 25.0);
    }

    #[test]
    fn mahalanobis_diagonal() {
        let m = CovarianceModel::diagonal(vec![4.0, 9.0]).unwrap();
        assert_eq!(mahalanobis_sq(&[2.0, 0.0], &m).unwrap(), 1.0);
    }

    #[test]
    fn mahalanobis_rotated_isotropic_matches_explicit_inverse() {
        // With isotropic delta the rotation is irrelevant: S = 2I, so
        // x^T S^{-1} x for x=(1,1) is 2/2 = 1. Cross-checked against the
        // explicit 2x2 inverse below.
        let m = CovarianceModel::shared_eigenbasis(Arc::new(rot45()), vec![2.0, 2.0]).unwrap();
        let got = mahalanobis_sq(&[1.0, 1.0], &m).unwrap();
        assert!((got - 1.0).abs() < 1e-12);

        // Explicit oracle: S = R diag(2,2) R^T = [[2,0],[0,2]], S^{-1} x = x/2.
        let x = [1.0, 1.0];
        let oracle = (x[0] * x[0] + x[1] * x[1]) / 2.0;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_dimension_mismatch() {
        let m = CovarianceModel::diagonal(vec![1.0, 1.0]).unwrap();
        assert!(mahalanobis_sq(&[1.0, 2.0, 3.0], &m).is_err());
    }

    #[test]
    fn rotation_rejects_non_orthogonal() {
        assert!(Rotation::from_rows(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn transform_identity_rotation_is_identity() {
        let data = Dataset::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let covs = DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(2.0));
        let (z, _, r) = transform_to_eigenbasis(&data, &covs).unwrap();
        assert!(r.is_identity());
        assert_eq!(z, data);
    }

    #[test]
    fn transform_quarter_turn() {
        // Counterclockwise quarter turn; R^T (1,0) = (0,-1).
        let r = Rotation::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let data = Dataset::new(vec![vec![1.0, 0.0]]).unwrap();
        let covs = DatasetCovariances::Shared(
            CovarianceModel::shared_eigenbasis(Arc::new(r), vec![1.0, 1.0]).unwrap(),
        );
        let (z, diag, _) = transform_to_eigenbasis(&data, &covs).unwrap();
        assert!((z.point(0)[0] - 0.0).abs() < 1e-15);
        assert!((z.point(0)[1] + 1.0).abs() < 1e-15);
        assert!(matches!(diag, DatasetCovariances::Shared(CovarianceModel::Diagonal(_))));
    }

    #[test]
    fn transform_round_trip() {
        let mut rng = crate::synth::rng_from_seed(42);
        let rot = Arc::new(random_rotation(10, &mut rng));
        let points: Vec<Vec<f64>> =
            (0..10).map(|_| (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let data = Dataset::new(points).unwrap();
        let covs = DatasetCovariances::Shared(
            CovarianceModel::shared_eigenbasis(rot.clone(), vec![1.0; 10]).unwrap(),
        );
        let (z, _, r) = transform_to_eigenbasis(&data, &covs).unwrap();
        for n in 0..data.len() {
            let back = r.apply(z.point(n));
            for i in 0..10 {
                assert!((back[i] - data.point(n)[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_covariance_shared_passthrough() {
        let covs = DatasetCovariances::Shared(CovarianceModel::ScaledIdentity(4.0));
        match mean_covariance(&covs).unwrap() {
            CovarianceModel::ScaledIdentity(s2) => assert_eq!(s2, 4.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_covariance_diagonals() {
        let covs = DatasetCovariances::per_point(vec![
            CovarianceModel::diagonal(vec![1.0, 3.0]).unwrap(),
            CovarianceModel::diagonal(vec![3.0, 1.0]).unwrap(),
        ])
        .unwrap();
        match mean_covariance(&covs).unwrap() {
            CovarianceModel::Diagonal(l) => assert_eq!(l, vec![2.0, 2.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_covariance_matches_bruteforce_sum() {
        let mut rng = crate::synth::rng_from_seed(7);
        let models: Vec<CovarianceModel> = (0..400)
            .map(|_| {
                CovarianceModel::diagonal((0..5).map(|_| rng.gen_range(0.5..4.0)).collect()).unwrap()
            })
            .collect();
        let mut expect = vec![0.0; 5];
        for m in &models {
            if let CovarianceModel::Diagonal(l) = m {
                expect.iter_mut().zip(l).for_each(|(a, v)| *a += v / 400.0);
            }
        }
        let covs = DatasetCovariances::per_point(models).unwrap();
        match mean_covariance(&covs).unwrap() {
            CovarianceModel::Diagonal(l) => {
                for (a, b) in l.iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn per_point_rejects_mixed_eigenbases() {
        let mut rng = crate::synth::rng_from_seed(3);
        let r1 = Arc::new(random_rotation(3, &mut rng));
        let r2 = Arc::new(random_rotation(3, &mut rng));
        let err = DatasetCovariances::per_point(vec![
            CovarianceModel::shared_eigenbasis(r1, vec![1.0; 3]).unwrap(),
            CovarianceModel::shared_eigenbasis(r2, vec![1.0; 3]).unwrap(),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn covariance_spec_round_trip() {
        let mut rng = crate::synth::rng_from_seed(11);
        let rot = Arc::new(random_rotation(4, &mut rng));
        let covs = DatasetCovariances::per_point(
            (0..6)
                .map(|_| {
                    CovarianceModel::shared_eigenbasis(
                        rot.clone(),
                        (0..4).map(|_| rng.gen_range(0.5..2.0)).collect(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let spec = CovarianceSpec::from_covariances(&covs).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: CovarianceSpec = serde_json::from_str(&json).unwrap();
        let covs2 = back.to_covariances(6).unwrap();
        for n in 0..6 {
            let x = vec![1.0, -2.0, 0.5, 3.0];
            let a = mahalanobis_sq(&x, covs.model(n)).unwrap();
            let b = mahalanobis_sq(&x, covs2.model(n)).unwrap();
            assert!((a - b).abs() < 1e-9, "point {n}: {a} vs {b}");
        }
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn mahalanobis_nonnegative_and_scaling(
                x in proptest::collection::vec(-100.0_f64..100.0, 3),
                s2 in 0.01_f64..100.0,
            ) {
                let m = CovarianceModel::ScaledIdentity(s2);
                let v = mahalanobis_sq(&x, &m).unwrap();
                prop_assert!(v >= 0.0);
                let norm2: f64 = x.iter().map(|a| a * a).sum();
                prop_assert!((v - norm2 / s2).abs() <= 1e-12 * v.max(1.0));
                prop_assert!((v == 0.0) == x.iter().all(|a| *a == 0.0));
            }

            #[test]
            fn eigenbasis_consistency(seed in 0u64..1000, xs in proptest::collection::vec(-10.0_f64..10.0, 5)) {
                let mut rng = crate::synth::rng_from_seed(seed);
                let rot = Arc::new(random_rotation(5, &mut rng));
                let delta: Vec<f64> = (0..5).map(|_| rng.gen_range(0.2..5.0)).collect();
                let rotated = CovarianceModel::shared_eigenbasis(rot.clone(), delta.clone()).unwrap();
                let direct = mahalanobis_sq(&xs, &rotated).unwrap();
                let in_basis = mahalanobis_sq(&rot.apply_transpose(&xs), &CovarianceModel::Diagonal(delta)).unwrap();
                prop_assert!((direct - in_basis).abs() <= 1e-12 * direct.max(1.0),
                    "direct {} vs eigenbasis {}", direct, in_basis);
            }
        }
    }
}
