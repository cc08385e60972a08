//! Differentiable targets.
//!
//! A target is a density `Π(x) ∝ exp(-Φ(x))` on `R^d` described by its
//! potential `Φ` and hand-coded gradient `∇Φ`. The built-in targets below are
//! analytically tractable so that samplers can be checked against ground truth.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A differentiable target density, read-only and shareable across chains.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// Negative log density up to an additive constant.
    fn potential(&self, x: &[f64]) -> f64;

    /// Writes `∇Φ(x)` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Evaluates both at once. Override when they share work.
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.potential(x)
    }

    fn name(&self) -> &str {
        "target"
    }
}

/// Parameters of a built-in target, addressable by `kind` in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    StandardGaussian {
        dim: usize,
    },
    DiagGaussian {
        variances: Vec<f64>,
    },
    /// Gaussian with covariance `Q diag(spectrum) Qᵀ` for a random orthogonal `Q`.
    RotatedGaussian {
        spectrum: Vec<f64>,
        rotation_seed: u64,
    },
    /// Sum of 2-D Rosenbrock terms over coordinate pairs `(x_{2i}, x_{2i+1})`.
    Rosenbrock {
        dim: usize,
        #[serde(default = "default_curvature")]
        curvature: f64,
    },
    SyntheticLogisticRegression {
        n_obs: usize,
        dim: usize,
        data_seed: u64,
    },
}

fn default_curvature() -> f64 {
    5.0
}

/// Closed-form moments of a Gaussian target.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub marginal_variances: Vec<f64>,
    /// Row-major `d × d` covariance.
    pub covariance: Vec<f64>,
    /// Covariance eigenvalues in decreasing order.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Kind {
    DiagGaussian {
        precision: Vec<f64>,
    },
    DenseGaussian {
        /// Row-major precision matrix.
        precision: Vec<f64>,
        /// Row-major `Q diag(sqrt(spectrum))`, maps standard normals to exact draws.
        factor: Vec<f64>,
    },
    Rosenbrock {
        curvature: f64,
    },
    Logistic {
        /// Row-major `n_obs × dim` covariates.
        covariates: Vec<f64>,
        labels: Vec<f64>,
        true_weights: Vec<f64>,
    },
}

/// A target built from a [`TargetSpec`].
#[derive(Debug, Clone)]
pub struct BuiltinTarget {
    name: String,
    dim: usize,
    kind: Kind,
    moments: Option<GaussianMoments>,
}

/// Builds the target described by `spec`.
pub fn make_target(spec: &TargetSpec) -> Result<BuiltinTarget> {
    match spec {
        TargetSpec::StandardGaussian { dim } => {
            check_dim(*dim)?;
            let mut t = diag_gaussian(&vec![1.0; *dim]);
            t.name = format!("standard-gaussian-{dim}");
            Ok(t)
        }
        TargetSpec::DiagGaussian { variances } => {
            check_dim(variances.len())?;
            check_positive("variances", variances)?;
            Ok(diag_gaussian(variances))
        }
        TargetSpec::RotatedGaussian {
            spectrum,
            rotation_seed,
        } => {
            check_dim(spectrum.len())?;
            check_positive("spectrum", spectrum)?;
            Ok(rotated_gaussian(spectrum, *rotation_seed))
        }
        TargetSpec::Rosenbrock { dim, curvature } => {
            check_dim(*dim)?;
            if dim % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "rosenbrock pairs coordinates, dim must be even (got {dim})"
                )));
            }
            if !(curvature.is_finite() && *curvature > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rosenbrock curvature must be positive (got {curvature})"
                )));
            }
            Ok(BuiltinTarget {
                name: format!("rosenbrock-{dim}"),
                dim: *dim,
                kind: Kind::Rosenbrock {
                    curvature: *curvature,
                },
                moments: None,
            })
        }
        TargetSpec::SyntheticLogisticRegression {
            n_obs,
            dim,
            data_seed,
        } => {
            check_dim(*dim)?;
            if *n_obs == 0 {
                return Err(Error::InvalidParameter("n_obs must be at least 1".into()));
            }
            Ok(logistic(*n_obs, *dim, *data_seed))
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be at least 1".into()));
    }
    Ok(())
}

fn check_positive(what: &str, values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{what} must be strictly positive (got {bad})"
        )));
    }
    Ok(())
}

fn diag_gaussian(variances: &[f64]) -> BuiltinTarget {
    let d = variances.len();
    let mut covariance = vec![0.0; d * d];
    for (i, v) in variances.iter().enumerate() {
        covariance[i * d + i] = *v;
    }
    let mut eigenvalues = variances.to_vec();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    BuiltinTarget {
        name: format!("diag-gaussian-{d}"),
        dim: d,
        kind: Kind::DiagGaussian {
            precision: variances.iter().map(|v| 1.0 / v).collect(),
        },
        moments: Some(GaussianMoments {
            mean: vec![0.0; d],
            marginal_variances: variances.to_vec(),
            covariance,
            eigenvalues,
        }),
    }
}

fn rotated_gaussian(spectrum: &[f64], seed: u64) -> BuiltinTarget {
    let d = spectrum.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();

    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spectrum));
    let inv_lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        spectrum.iter().map(|v| 1.0 / v),
    ));
    let sqrt_lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        spectrum.iter().map(|v| v.sqrt()),
    ));
    let cov = &q * lam * q.transpose();
    let prec = &q * inv_lam * q.transpose();
    let factor = &q * sqrt_lam;

    let row_major = |m: &DMatrix<f64>| -> Vec<f64> {
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect()
    };
    let mut eigenvalues = spectrum.to_vec();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    BuiltinTarget {
        name: format!("rotated-gaussian-{d}"),
        dim: d,
        kind: Kind::DenseGaussian {
            precision: row_major(&prec),
            factor: row_major(&factor),
        },
        moments: Some(GaussianMoments {
            mean: vec![0.0; d],
            marginal_variances: (0..d).map(|i| cov[(i, i)]).collect(),
            covariance: row_major(&cov),
            eigenvalues,
        }),
    }
}

fn logistic(n_obs: usize, dim: usize, seed: u64) -> BuiltinTarget {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let true_weights: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let covariates: Vec<f64> = (0..n_obs * dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let labels = covariates
        .chunks_exact(dim)
        .map(|row| {
            let p = sigmoid(dot(row, &true_weights));
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    BuiltinTarget {
        name: format!("logistic-regression-{n_obs}x{dim}"),
        dim,
        kind: Kind::Logistic {
            covariates,
            labels,
            true_weights,
        },
        moments: None,
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BuiltinTarget {
    /// Closed-form moments for Gaussian kinds, `None` otherwise.
    pub fn gaussian_moments(&self) -> Option<&GaussianMoments> {
        self.moments.as_ref()
    }

    /// Draws an exact sample for Gaussian kinds.
    pub fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let d = self.dim;
        match &self.kind {
            Kind::DiagGaussian { precision } => Some(
                precision
                    .iter()
                    .map(|p| rng.sample::<f64, _>(StandardNormal) / p.sqrt())
                    .collect(),
            ),
            Kind::DenseGaussian { factor, .. } => {
                let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                Some(factor.chunks_exact(d).map(|row| dot(row, &xi)).collect())
            }
            _ => None,
        }
    }

    /// Weights that generated the labels of a logistic-regression target.
    pub fn true_weights(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Logistic { true_weights, .. } => Some(true_weights),
            _ => None,
        }
    }
}

impl TargetDensity for BuiltinTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::DiagGaussian { precision } => {
                0.5 * x
                    .iter()
                    .zip(precision)
                    .map(|(xi, p)| p * xi * xi)
                    .sum::<f64>()
            }
            Kind::DenseGaussian { precision, .. } => {
                let d = self.dim;
                0.5 * precision
                    .chunks_exact(d)
                    .zip(x)
                    .map(|(row, xi)| xi * dot(row, x))
                    .sum::<f64>()
            }
            Kind::Rosenbrock { curvature } => x
                .chunks_exact(2)
                .map(|p| {
                    let (a, b) = (p[0], p[1]);
                    curvature * (b - a * a).powi(2) + (1.0 - a).powi(2)
                })
                .sum(),
            Kind::Logistic {
                covariates, labels, ..
            } => {
                let lik: f64 = covariates
                    .chunks_exact(self.dim)
                    .zip(labels)
                    .map(|(row, y)| {
                        let t = dot(row, x);
                        softplus(t) - y * t
                    })
                    .sum();
                lik + 0.5 * dot(x, x)
            }
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match &self.kind {
            Kind::DiagGaussian { precision } => {
                for ((g, xi), p) in grad.iter_mut().zip(x).zip(precision) {
                    *g = p * xi;
                }
            }
            Kind::DenseGaussian { precision, .. } => {
                for (g, row) in grad.iter_mut().zip(precision.chunks_exact(self.dim)) {
                    *g = dot(row, x);
                }
            }
            Kind::Rosenbrock { curvature } => {
                for (g, p) in grad.chunks_exact_mut(2).zip(x.chunks_exact(2)) {
                    let (a, b) = (p[0], p[1]);
                    let r = b - a * a;
                    g[0] = -4.0 * curvature * a * r - 2.0 * (1.0 - a);
                    g[1] = 2.0 * curvature * r;
                }
            }
            Kind::Logistic {
                covariates, labels, ..
            } => {
                grad.copy_from_slice(x);
                for (row, y) in covariates.chunks_exact(self.dim).zip(labels) {
                    let r = sigmoid(dot(row, x)) - y;
                    for (g, c) in grad.iter_mut().zip(row) {
                        *g += r * c;
                    }
                }
            }
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Outcome of [`check_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// Largest error over all points.
    pub max_error: f64,
    /// Per-point error, `max_i |fd_i - g_i| / max(‖g‖∞, 1)`.
    pub errors: Vec<f64>,
    /// Indices of points whose error exceeds the tolerance.
    pub failures: Vec<usize>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `∇Φ` against central finite differences of `Φ` at each point.
pub fn check_gradient<T: TargetDensity + ?Sized>(
    target: &T,
    points: &[Vec<f64>],
    tol: f64,
) -> GradientReport {
    let d = target.dim();
    let mut grad = vec![0.0; d];
    let mut errors = Vec::with_capacity(points.len());
    for x in points {
        target.gradient(x, &mut grad);
        let scale = grad.iter().fold(1.0_f64, |m, g| m.max(g.abs()));
        let mut probe = x.clone();
        let mut err = 0.0_f64;
        for i in 0..d {
            let eps = 1e-5 * (1.0 + x[i].abs());
            probe[i] = x[i] + eps;
            let up = target.potential(&probe);
            probe[i] = x[i] - eps;
            let down = target.potential(&probe);
            probe[i] = x[i];
            let fd = (up - down) / (2.0 * eps);
            err = err.max((fd - grad[i]).abs() / scale);
        }
        errors.push(err);
    }
    let failures = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| !(**e <= tol))
        .map(|(i, _)| i)
        .collect();
    GradientReport {
        max_error: errors.iter().cloned().fold(0.0, f64::max),
        errors,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    struct Corrupted(BuiltinTarget);

    impl TargetDensity for Corrupted {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn potential(&self, x: &[f64]) -> f64 {
            self.0.potential(x)
        }
        fn gradient(&self, x: &[f64], grad: &mut [f64]) {
            self.0.gradient(x, grad);
            grad.iter_mut().for_each(|g| *g *= 1.01);
        }
    }

    #[test]
    fn standard_gaussian_gradient_is_identity() {
        let t = make_target(&TargetSpec::StandardGaussian { dim: 1 }).unwrap();
        let mut g = [0.0];
        t.gradient(&[3.0], &mut g);
        assert_eq!(g[0], 3.0);
    }

    #[test]
    fn diag_gaussian_gradient() {
        let t = make_target(&TargetSpec::DiagGaussian {
            variances: vec![4.0, 1.0],
        })
        .unwrap();
        let mut g = [0.0; 2];
        t.gradient(&[2.0, 2.0], &mut g);
        assert_eq!(g, [0.5, 2.0]);
    }

    #[test]
    fn rosenbrock_minimum_is_stationary() {
        let t = make_target(&TargetSpec::Rosenbrock {
            dim: 4,
            curvature: 5.0,
        })
        .unwrap();
        let mut g = [1.0; 4];
        t.gradient(&[1.0; 4], &mut g);
        assert_eq!(g, [0.0; 4]);
        assert_eq!(t.potential(&[1.0; 4]), 0.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = [
            TargetSpec::StandardGaussian { dim: 0 },
            TargetSpec::DiagGaussian {
                variances: vec![1.0, 0.0],
            },
            TargetSpec::DiagGaussian {
                variances: vec![-1.0],
            },
            TargetSpec::RotatedGaussian {
                spectrum: vec![],
                rotation_seed: 0,
            },
            TargetSpec::Rosenbrock {
                dim: 3,
                curvature: 5.0,
            },
            TargetSpec::SyntheticLogisticRegression {
                n_obs: 0,
                dim: 2,
                data_seed: 0,
            },
        ];
        for spec in bad {
            assert!(
                matches!(make_target(&spec), Err(Error::InvalidParameter(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn finite_differences_agree() {
        let specs = [
            TargetSpec::StandardGaussian { dim: 3 },
            TargetSpec::SyntheticLogisticRegression {
                n_obs: 50,
                dim: 5,
                data_seed: 7,
            },
            TargetSpec::RotatedGaussian {
                spectrum: vec![9.0, 4.0, 1.0],
                rotation_seed: 3,
            },
            TargetSpec::Rosenbrock {
                dim: 4,
                curvature: 5.0,
            },
        ];
        for spec in specs {
            let t = make_target(&spec).unwrap();
            let report = check_gradient(&t, &random_points(t.dim(), 10, 11), 1e-5);
            assert!(report.passed(), "{spec:?}: {report:?}");
        }
    }

    #[test]
    fn corrupted_gradient_fails_check() {
        let t = make_target(&TargetSpec::StandardGaussian { dim: 3 }).unwrap();
        let report = check_gradient(&Corrupted(t), &random_points(3, 10, 2), 1e-5);
        assert!(!report.passed());
        assert!(report.max_error > 1e-3);
    }

    #[test]
    fn gaussian_densities_have_constant_ratio() {
        // exp(-Φ) divided by the normalized Gaussian density must not depend on x.
        let specs = [
            TargetSpec::StandardGaussian { dim: 3 },
            TargetSpec::DiagGaussian {
                variances: vec![0.5, 2.0, 9.0],
            },
            TargetSpec::RotatedGaussian {
                spectrum: vec![9.0, 4.0, 1.0],
                rotation_seed: 5,
            },
        ];
        for spec in specs {
            let t = make_target(&spec).unwrap();
            let cov = &t.gaussian_moments().unwrap().covariance;
            let d = t.dim();
            let sigma = DMatrix::from_row_slice(d, d, cov);
            let chol = sigma.clone().cholesky().unwrap();
            let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let ratios: Vec<f64> = (0..3)
                .map(|_| {
                    let x = t.sample_exact(&mut rng).unwrap();
                    let xv = nalgebra::DVector::from_column_slice(&x);
                    let quad = xv.dot(&chol.solve(&xv));
                    let log_pdf = -0.5 * quad
                        - 0.5 * log_det
                        - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
                    (-t.potential(&x) - log_pdf).exp()
                })
                .collect();
            for r in &ratios[1..] {
                assert!((r / ratios[0] - 1.0).abs() < 1e-10, "{spec:?} {ratios:?}");
            }
        }
    }

    #[test]
    fn logistic_is_reproducible_and_sane() {
        let spec = TargetSpec::SyntheticLogisticRegression {
            n_obs: 200,
            dim: 4,
            data_seed: 9,
        };
        let a = make_target(&spec).unwrap();
        let b = make_target(&spec).unwrap();
        let x = [0.3, -0.2, 0.1, 0.5];
        assert_eq!(a.potential(&x), b.potential(&x));

        let w = a.true_weights().unwrap().to_vec();
        let mut g = vec![0.0; 4];
        a.gradient(&w, &mut g);
        let norm = dot(&g, &g).sqrt();
        assert!(norm < 10.0 * (200.0f64).sqrt(), "{norm}");

        // Convexity along a random segment.
        let y = [-1.0, 2.0, 0.5, -0.3];
        let mid: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
        assert!(a.potential(&mid) <= 0.5 * (a.potential(&x) + a.potential(&y)));
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: TargetSpec = toml::from_str("kind = \"rosenbrock\"\ndim = 2\n").unwrap();
        assert_eq!(
            spec,
            TargetSpec::Rosenbrock {
                dim: 2,
                curvature: 5.0
            }
        );
        let err =
            toml::from_str::<TargetSpec>("kind = \"standard-gaussian\"\ndim = 2\nbogus = 1\n")
                .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}
