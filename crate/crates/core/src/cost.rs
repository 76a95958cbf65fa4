//! Local objectives `f_i`, their proximal maps, and the centralized reference
//! solver used to measure consensus error.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NEWTON_MAX_ITERS: usize = 100;
/// Relative first-order residual accepted by the prox and centralized solvers.
pub const PROX_TOL: f64 = 1e-12;

/// A twice-differentiable convex objective on `R^n`.
pub trait LocalCost: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Strong-convexity modulus, 0 if only convex.
    fn modulus(&self) -> f64;

    /// Minimizer of `f(y) + (sigma/2)||y - v||^2`.
    fn prox(&self, sigma: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        newton_prox(self, sigma, v)
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        None
    }
}

pub type SharedCost = Arc<dyn LocalCost>;

/// `f(x) = 1/2 x'Qx - <r, x>` with `Q` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    q: DMatrix<f64>,
    r: DVector<f64>,
    modulus: f64,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        let n = r.len();
        if q.nrows() != n || q.ncols() != n || n == 0 {
            return Err(Error::InvalidCost(format!(
                "Q is {}x{} but r has length {n}",
                q.nrows(),
                q.ncols()
            )));
        }
        let asym = (&q - q.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + q.abs().max()) {
            return Err(Error::InvalidCost(format!("Q is not symmetric ({asym:e})")));
        }
        let modulus = q.clone().symmetric_eigen().eigenvalues.min();
        if modulus <= 0.0 {
            return Err(Error::InvalidCost(format!(
                "Q is not positive definite (min eigenvalue {modulus:e})"
            )));
        }
        Ok(QuadraticCost { q, r, modulus })
    }

    /// Scalar `(x - a)^2 / 2`.
    pub fn scalar(curvature: f64, a: f64) -> Result<Self> {
        QuadraticCost::new(
            DMatrix::from_element(1, 1, curvature),
            DVector::from_element(1, curvature * a),
        )
    }

    /// Random SPD `Q` with eigenvalues log-spaced in `[1, cond]` and a random
    /// orthogonal basis; `r` is standard normal.
    pub fn random(n: usize, cond: f64, seed: u64) -> Result<Self> {
        QuadraticCost::random_scaled(n, cond, 1.0, seed)
    }

    /// As `random`, with eigenvalues in `[min_curvature, min_curvature cond]`.
    pub fn random_scaled(n: usize, cond: f64, min_curvature: f64, seed: u64) -> Result<Self> {
        if n == 0 || !(cond >= 1.0) || !(min_curvature > 0.0 && min_curvature.is_finite()) {
            return Err(Error::InvalidCost(format!(
                "random quadratic needs n >= 1, cond >= 1 and min_curvature > 0 \
                 (got n={n}, cond={cond}, min_curvature={min_curvature})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let u = g.qr().q();
        let eig: DVector<f64> = DVector::from_fn(n, |k, _| {
            if n == 1 {
                1.0
            } else {
                cond.powf(k as f64 / (n - 1) as f64)
            }
        }) * min_curvature;
        let q: DMatrix<f64> = &u * DMatrix::from_diagonal(&eig) * u.transpose();
        let q = (&q + q.transpose()) * 0.5;
        let r = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        QuadraticCost::new(q, r)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }
}

impl LocalCost for QuadraticCost {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.r.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.r
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }

    fn modulus(&self) -> f64 {
        self.modulus
    }

    fn prox(&self, sigma: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_sigma(sigma)?;
        let n = self.dim();
        let m = &self.q + DMatrix::identity(n, n) * sigma;
        let rhs = &self.r + v * sigma;
        let chol = m.cholesky().ok_or(Error::SingularH)?;
        Ok(chol.solve(&rhs))
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        Some(self)
    }
}

/// Scalar `f(x) = x^4/12 + q x^2/2`, strongly convex with modulus `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCost {
    q: f64,
}

impl QuarticCost {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::InvalidCost(format!("quartic needs q > 0, got {q}")));
        }
        Ok(QuarticCost { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl LocalCost for QuarticCost {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let t = x[0];
        t.powi(4) / 12.0 + self.q * t * t / 2.0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = x[0];
        DVector::from_element(1, t.powi(3) / 3.0 + self.q * t)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x[0] * x[0] + self.q)
    }

    fn modulus(&self) -> f64 {
        self.q
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "prox penalty must be positive, got {sigma}"
        )))
    }
}

/// Damped Newton on `f(y) + (sigma/2)||y - v||^2`, started at `v`.
pub fn newton_prox<C: LocalCost + ?Sized>(
    cost: &C,
    sigma: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_sigma(sigma)?;
    let n = cost.dim();
    let tol = PROX_TOL * (1.0 + sigma * v.norm());
    let objective = |y: &DVector<f64>| cost.value(y) + 0.5 * sigma * (y - v).norm_squared();
    let grad = |y: &DVector<f64>| cost.gradient(y) + (y - v) * sigma;

    let mut y = v.clone();
    let mut g = grad(&y);
    for _ in 0..NEWTON_MAX_ITERS {
        if g.norm() <= tol {
            return Ok(y);
        }
        let h = cost.hessian(&y) + DMatrix::identity(n, n) * sigma;
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone() / sigma,
        };
        y = backtrack(&objective, &y, &step, g.dot(&step));
        g = grad(&y);
    }
    if g.norm() <= tol {
        Ok(y)
    } else {
        Err(Error::NewtonNotConverged {
            iterations: NEWTON_MAX_ITERS,
            residual: g.norm(),
        })
    }
}

// Armijo backtracking along -step; falls back to the full step once the
// objective decrease drops below rounding.
fn backtrack<F: Fn(&DVector<f64>) -> f64>(
    objective: &F,
    y: &DVector<f64>,
    step: &DVector<f64>,
    slope: f64,
) -> DVector<f64> {
    let f0 = objective(y);
    let mut t = 1.0;
    for _ in 0..40 {
        let cand = y - step * t;
        let fc = objective(&cand);
        if fc <= f0 - 1e-4 * t * slope || (f0 - fc).abs() <= 1e-15 * (1.0 + f0.abs()) {
            return cand;
        }
        t *= 0.5;
    }
    y - step * t
}

/// `argmin_x sum_i f_i(x)`. Exact linear solve when every cost is quadratic,
/// damped Newton otherwise.
pub fn centralized_solve(costs: &[SharedCost]) -> Result<DVector<f64>> {
    let first = costs
        .first()
        .ok_or_else(|| Error::InvalidCost("no costs given".into()))?;
    let n = first.dim();
    if costs.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch(
            "costs have different dimensions".into(),
        ));
    }

    let quads: Option<Vec<&QuadraticCost>> = costs.iter().map(|c| c.as_quadratic()).collect();
    if let Some(quads) = quads {
        let mut q = DMatrix::zeros(n, n);
        let mut r = DVector::zeros(n);
        for c in quads {
            q += c.q();
            r += c.r();
        }
        return q
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&r))
            .or_else(|| q.lu().solve(&r))
            .ok_or(Error::SingularH);
    }

    let tol = PROX_TOL * costs.len() as f64;
    let total = |x: &DVector<f64>| costs.iter().map(|c| c.value(x)).sum::<f64>();
    let grad = |x: &DVector<f64>| {
        costs
            .iter()
            .fold(DVector::zeros(n), |acc, c| acc + c.gradient(x))
    };
    let mut x = DVector::zeros(n);
    let mut g = grad(&x);
    for _ in 0..NEWTON_MAX_ITERS {
        if g.norm() <= tol {
            return Ok(x);
        }
        let h = costs
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, c| acc + c.hessian(&x));
        let step = h
            .clone()
            .cholesky()
            .map(|c| c.solve(&g))
            .or_else(|| h.lu().solve(&g))
            .ok_or(Error::SingularH)?;
        x = backtrack(&total, &x, &step, g.dot(&step));
        g = grad(&x);
    }
    if g.norm() <= tol {
        Ok(x)
    } else {
        Err(Error::NewtonNotConverged {
            iterations: NEWTON_MAX_ITERS,
            residual: g.norm(),
        })
    }
}

fn unit_curvature() -> f64 {
    1.0
}

/// Cost description in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CostSpec {
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        r: Vec<f64>,
    },
    Quartic {
        q: f64,
    },
    RandomQuadratic {
        n: usize,
        cond: f64,
        seed: u64,
        #[serde(default = "unit_curvature")]
        min_curvature: f64,
    },
}

impl CostSpec {
    pub fn build(&self) -> Result<SharedCost> {
        Ok(match self {
            CostSpec::Quadratic { q, r } => {
                let n = r.len();
                if q.len() != n || q.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidCost("Q must be n x n with n = len(r)".into()));
                }
                let qm = DMatrix::from_fn(n, n, |i, j| q[i][j]);
                Arc::new(QuadraticCost::new(qm, DVector::from_vec(r.clone()))?)
            }
            CostSpec::Quartic { q } => Arc::new(QuarticCost::new(*q)?),
            CostSpec::RandomQuadratic {
                n,
                cond,
                seed,
                min_curvature,
            } => Arc::new(QuadraticCost::random_scaled(
                *n,
                *cond,
                *min_curvature,
                *seed,
            )?),
        })
    }

    /// Same family with the seed shifted, for drawing distinct per-node costs.
    pub fn with_seed_offset(&self, offset: u64) -> CostSpec {
        match self {
            CostSpec::RandomQuadratic {
                n,
                cond,
                seed,
                min_curvature,
            } => CostSpec::RandomQuadratic {
                n: *n,
                cond: *cond,
                seed: seed.wrapping_add(offset),
                min_curvature: *min_curvature,
            },
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn scalar_quadratic_prox() {
        let a = 1.7;
        let c = QuadraticCost::scalar(1.0, a).unwrap();
        for sigma in [0.3, 1.0, 4.0] {
            let y = c.prox(sigma, &v1(-0.4)).unwrap();
            assert_abs_diff_eq!(y[0], (a + sigma * -0.4) / (1.0 + sigma), epsilon = 1e-15);
            let fixed = c.prox(sigma, &v1(a)).unwrap();
            assert_abs_diff_eq!(fixed[0], a, epsilon = 1e-15);
        }
        let c0 = QuadraticCost::scalar(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(c0.prox(1.0, &v1(2.0)).unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn quartic_prox_symmetric_point() {
        let c = QuarticCost::new(1.0).unwrap();
        assert_eq!(c.prox(1.0, &v1(0.0)).unwrap()[0], 0.0);
    }

    // root of y^3/3 + y + 2(y - 3) = 0 by bisection
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quartic_prox_matches_bisection() {
        let oracle = bisect(|y| y.powi(3) / 3.0 + y + 2.0 * (y - 3.0), 0.0, 3.0);
        let c = QuarticCost::new(1.0).unwrap();
        let y = c.prox(2.0, &v1(3.0)).unwrap()[0];
        assert_abs_diff_eq!(y, oracle, epsilon = 1e-12);
    }

    #[test]
    fn prox_first_order_residual() {
        let c = QuadraticCost::random(4, 50.0, 11).unwrap();
        let v = DVector::from_vec(vec![3.0, -1.0, 0.5, 10.0]);
        for sigma in [0.01, 1.0, 100.0] {
            let y = c.prox(sigma, &v).unwrap();
            let res = (c.gradient(&y) + (&y - &v) * sigma).norm();
            assert!(res <= 1e-12 * (1.0 + sigma * v.norm()), "residual {res:e}");
            let y_newton = newton_prox(&c, sigma, &v).unwrap();
            assert_abs_diff_eq!((y - y_newton).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn prox_rejects_nonpositive_sigma() {
        let c = QuarticCost::new(1.0).unwrap();
        assert!(matches!(
            c.prox(0.0, &v1(1.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn centralized_cases() {
        let (a1, a2) = (1.5, -4.0);
        let costs: Vec<SharedCost> = vec![
            Arc::new(QuadraticCost::scalar(1.0, a1).unwrap()),
            Arc::new(QuadraticCost::scalar(1.0, a2).unwrap()),
        ];
        assert_abs_diff_eq!(
            centralized_solve(&costs).unwrap()[0],
            (a1 + a2) / 2.0,
            epsilon = 1e-14
        );

        let q = QuadraticCost::random(3, 10.0, 5).unwrap();
        let expected = q.q().clone().lu().solve(q.r()).unwrap();
        let costs: Vec<SharedCost> = (0..6).map(|_| Arc::new(q.clone()) as SharedCost).collect();
        let x = centralized_solve(&costs).unwrap();
        assert_abs_diff_eq!((x - expected).norm(), 0.0, epsilon = 1e-12);

        let costs: Vec<SharedCost> = (0..10)
            .map(|_| Arc::new(QuarticCost::new(1.0).unwrap()) as SharedCost)
            .collect();
        assert_eq!(centralized_solve(&costs).unwrap()[0], 0.0);
    }

    #[test]
    fn centralized_mixed_costs_is_stationary() {
        let costs: Vec<SharedCost> = vec![
            Arc::new(QuarticCost::new(0.5).unwrap()),
            Arc::new(QuadraticCost::scalar(2.0, 3.0).unwrap()),
            Arc::new(QuarticCost::new(0.1).unwrap()),
        ];
        let x = centralized_solve(&costs).unwrap();
        let g: f64 = costs.iter().map(|c| c.gradient(&x)[0]).sum();
        assert!(g.abs() <= 1e-12 * 3.0);
    }

    #[test]
    fn random_quadratic_has_prescribed_condition() {
        let c = QuadraticCost::random(5, 10.0, 3).unwrap();
        let eig = c.q().clone().symmetric_eigen().eigenvalues;
        assert_abs_diff_eq!(eig.min(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig.max(), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.modulus(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cost_spec_json() {
        let s: CostSpec =
            serde_json::from_str(r#"{"type":"quadratic","Q":[[2.0]],"r":[1.0]}"#).unwrap();
        assert_abs_diff_eq!(
            s.build().unwrap().prox(1.0, &v1(0.0)).unwrap()[0],
            1.0 / 3.0,
            epsilon = 1e-15
        );
        let s: CostSpec = serde_json::from_str(r#"{"type":"quartic","q":1.0}"#).unwrap();
        assert_eq!(s.build().unwrap().modulus(), 1.0);
        let s: CostSpec =
            serde_json::from_str(r#"{"type":"random_quadratic","n":5,"cond":10,"seed":3}"#)
                .unwrap();
        assert_eq!(s.build().unwrap().dim(), 5);
        let bad: CostSpec =
            serde_json::from_str(r#"{"type":"quadratic","Q":[[1.0,2.0],[0.0,1.0]],"r":[1.0,1.0]}"#)
                .unwrap();
        assert!(bad.build().is_err());
    }

    proptest! {
        #[test]
        fn quartic_hessian_dominates_modulus(q in 0.01f64..20.0, x in -50.0f64..50.0) {
            let c = QuarticCost::new(q).unwrap();
            prop_assert!(c.hessian(&v1(x))[0] - c.modulus() >= 0.0);
        }
    }
}
