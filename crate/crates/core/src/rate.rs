//! Linearized rate analysis.
//!
//! Around the optimum the synchronous iteration is the affine map
//! `z -> T z + u` (exact for quadratic costs). Under random masks `B(k)` it
//! becomes `z -> z + B (T z + u - z)`, and the second moment of the error
//! evolves under the lifted operator `L = E[T_B (x) T_B]` with
//! `T_B = I - B (I - T)`.

use nalgebra::{Complex, DMatrix, DVector};
use ndarray::Array2;
use ndarray_linalg::{EigVals, SVD};
use serde::{Deserialize, Serialize};

use crate::cost::SharedCost;
use crate::error::{Error, Result};
use crate::graph::{Graph, TopologyMatrices};
use crate::network::{draw_events, effective_beta_probability, LossModel};
use crate::solver::Params;

/// Eigenvalues within this distance of 1 count as unit eigenvalues.
pub const TOL_ONE: f64 = 1e-9;
/// Samples used for the Monte Carlo estimate of `E[B (x) B]`.
pub const MC_SAMPLES: u64 = 1_000_000;
/// Largest accepted standard error of a Monte Carlo pair probability.
pub const MC_MAX_STD_ERROR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RateModel {
    pub n: usize,
    pub params: Params,
    pub x_star: DVector<f64>,
    /// Block-diagonal, blocks `rho d_i I + hess f_i(x*)`.
    pub h: DMatrix<f64>,
    pub h_inv: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub u: DVector<f64>,
    /// Stacked `hess f_i(x*) x* - grad f_i(x*)`.
    pub g: DVector<f64>,
    /// Eigenvalues of `T`, by decreasing modulus.
    pub spectrum: Vec<Complex<f64>>,
    /// Largest modulus among the eigenvalues different from 1.
    pub gamma_m: f64,
    pub eig_one_count: usize,
    /// `max_i 1 / (m_i + rho d_i)`.
    pub zeta: f64,
    mats: TopologyMatrices,
}

/// Right singular vectors (columns) belonging to the `count` smallest
/// singular values, via LAPACK.
pub fn trailing_right_singular_vectors(m: &DMatrix<f64>, count: usize) -> Result<DMatrix<f64>> {
    let (r, c) = m.shape();
    let a = Array2::from_shape_fn((r, c), |(i, j)| m[(i, j)]);
    let (_, _, vt) = a
        .svd(false, true)
        .map_err(|e| Error::DimensionMismatch(format!("SVD failed: {e}")))?;
    let vt = vt.expect("requested V");
    // LAPACK sorts singular values in descending order
    Ok(DMatrix::from_fn(c, count, |row, col| {
        vt[(c - count + col, row)]
    }))
}

/// Eigenvalues of a general square matrix via LAPACK, by decreasing modulus.
pub fn sorted_spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let k = m.nrows();
    // column-major storage read back as the transpose, which has the same spectrum
    let view = Array2::from_shape_vec((k, k), m.as_slice().to_vec())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let ev = view
        .eigvals()
        .map_err(|e| Error::DimensionMismatch(format!("eigensolver failed: {e}")))?;
    let mut ev: Vec<Complex<f64>> = ev.iter().map(|c| Complex::new(c.re, c.im)).collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    Ok(ev)
}

fn split_unit(spectrum: &[Complex<f64>]) -> (usize, f64) {
    let mut count = 0;
    let mut gamma: f64 = 0.0;
    for ev in spectrum {
        if (ev - Complex::new(1.0, 0.0)).norm() <= TOL_ONE {
            count += 1;
        } else {
            gamma = gamma.max(ev.norm());
        }
    }
    (count, gamma)
}

pub fn build_rate_model(
    g: &Graph,
    costs: &[SharedCost],
    p: &Params,
    x_star: &DVector<f64>,
) -> Result<RateModel> {
    p.validate()?;
    let n = x_star.len();
    if costs.len() != g.num_nodes() || costs.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch(
            "costs must match the graph and the optimum's dimension".into(),
        ));
    }
    let nn = n * g.num_nodes();
    let mut h = DMatrix::zeros(nn, nn);
    let mut h_inv = DMatrix::zeros(nn, nn);
    let mut gv = DVector::zeros(nn);
    let mut zeta: f64 = 0.0;
    for (i, c) in costs.iter().enumerate() {
        let hess = c.hessian(x_star);
        let block = &hess + DMatrix::identity(n, n) * (p.rho * g.degree(i) as f64);
        let inv = block.clone().try_inverse().ok_or(Error::SingularH)?;
        h.view_mut((i * n, i * n), (n, n)).copy_from(&block);
        h_inv.view_mut((i * n, i * n), (n, n)).copy_from(&inv);
        gv.rows_mut(i * n, n)
            .copy_from(&(&hess * x_star - c.gradient(x_star)));
        zeta = zeta.max(1.0 / (c.modulus() + p.rho * g.degree(i) as f64));
    }

    let mats = g.matrices(n);
    let k = mats.a.nrows();
    let pa_hinv = &mats.p * &mats.a * &h_inv * (2.0 * p.alpha * p.rho);
    let t = DMatrix::identity(k, k) * (1.0 - p.alpha) - &mats.p * p.alpha
        + &pa_hinv * mats.a.transpose();
    let u = &pa_hinv * &gv;

    let spectrum = sorted_spectrum(&t)?;
    let (eig_one_count, gamma_m) = split_unit(&spectrum);
    Ok(RateModel {
        n,
        params: *p,
        x_star: x_star.clone(),
        h,
        h_inv,
        t,
        u,
        g: gv,
        spectrum,
        gamma_m,
        eig_one_count,
        zeta,
        mats,
    })
}

impl RateModel {
    pub fn matrices(&self) -> &TopologyMatrices {
        &self.mats
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// `T z + u`.
    pub fn affine_step(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.t * z + &self.u
    }

    /// `z + B (T z + u - z)` with `B = diag(beta)` expanded over `n`-blocks.
    pub fn masked_affine_step(&self, z: &DVector<f64>, beta: &[bool]) -> DVector<f64> {
        let full = self.affine_step(z);
        DVector::from_fn(
            z.len(),
            |r, _| if beta[r / self.n] { full[r] } else { z[r] },
        )
    }

    /// Primal vector generated by `z`: `H^{-1}(A'z + g)`.
    pub fn primal_from(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.h_inv * (self.mats.a.transpose() * z + &self.g)
    }

    /// Orthonormal basis (columns) of `ker(I - T)`.
    pub fn unit_eigenspace(&self) -> DMatrix<f64> {
        let k = self.dim();
        trailing_right_singular_vectors(&(DMatrix::identity(k, k) - &self.t), self.eig_one_count)
            .expect("T is finite by construction")
    }

    /// Minimum-norm solution of `(I - T) z = u`. The kernel `W` of `I - T`
    /// is also its left kernel, so `(I - T + W W') z = u` is nonsingular and
    /// its solution is orthogonal to `W`.
    pub fn fixed_point_z(&self) -> Result<DVector<f64>> {
        let k = self.dim();
        let i_t = DMatrix::identity(k, k) - &self.t;
        let w = self.unit_eigenspace();
        let z = (&i_t + &w * w.transpose())
            .lu()
            .solve(&self.u)
            .ok_or(Error::InconsistentSystem(f64::INFINITY))?;
        let residual = (&i_t * &z - &self.u).norm();
        if residual > 1e-8 * (1.0 + self.u.norm()) {
            return Err(Error::InconsistentSystem(residual));
        }
        Ok(z)
    }

    pub fn check_spectrum(&self) -> SpectralCheck {
        check_spectrum(self, &self.mats)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCheck {
    /// `max |T - T'|`.
    pub symmetry_defect: f64,
    /// Largest `|Im(lambda)|`.
    pub max_imag: f64,
    /// Largest distance of an eigenvalue outside `[-1, 1]`, 0 if none.
    pub real_interval_excess: f64,
    /// Largest modulus among the non-unit eigenvalues.
    pub max_nonunit_modulus: f64,
    pub unit_count: usize,
    /// `||A'v|| / ||v||` for a basis of the unit eigenspace.
    pub unit_kernel_ratios: Vec<f64>,
    /// `max_lambda |lambda - (1 - alpha)| - alpha`; nonpositive when the
    /// spectrum lies in the disc through 1 centred at `1 - alpha`.
    pub disc_excess: f64,
    pub symmetric: bool,
    pub real_in_unit_interval: bool,
    pub unit_in_kernel: bool,
    pub nonunit_inside: bool,
}

impl SpectralCheck {
    /// Unit eigenvalues have eigenvectors in `ker A'` and every other
    /// eigenvalue lies strictly inside the unit circle.
    pub fn pass(&self) -> bool {
        self.unit_in_kernel && self.nonunit_inside
    }
}

pub fn check_spectrum(model: &RateModel, mats: &TopologyMatrices) -> SpectralCheck {
    let t = &model.t;
    let symmetry_defect = (t - t.transpose()).abs().max();
    let max_imag = model
        .spectrum
        .iter()
        .map(|e| e.im.abs())
        .fold(0.0, f64::max);
    let real_interval_excess = model
        .spectrum
        .iter()
        .map(|e| {
            let d = e.re.abs() - 1.0;
            e.im.abs().max(d).max(0.0)
        })
        .fold(0.0, f64::max);
    let basis = model.unit_eigenspace();
    let at = mats.a.transpose();
    let unit_kernel_ratios: Vec<f64> = basis
        .column_iter()
        .map(|v| (&at * v).norm() / v.norm())
        .collect();
    let alpha = model.params.alpha;
    let disc_excess = model
        .spectrum
        .iter()
        .map(|e| (e - Complex::new(1.0 - alpha, 0.0)).norm() - alpha)
        .fold(f64::NEG_INFINITY, f64::max);
    SpectralCheck {
        symmetry_defect,
        max_imag,
        real_interval_excess,
        max_nonunit_modulus: model.gamma_m,
        unit_count: model.eig_one_count,
        symmetric: symmetry_defect <= 1e-12,
        real_in_unit_interval: real_interval_excess <= 1e-12,
        unit_in_kernel: unit_kernel_ratios.iter().all(|&r| r <= 1e-8),
        nonunit_inside: model.gamma_m < 1.0 - TOL_ONE,
        unit_kernel_ratios,
        disc_excess,
    }
}

/// Diagonal of `E[B]`: `p_beta(slot)` repeated over each `n`-block.
pub fn expected_b(model: &LossModel, g: &Graph, n: usize) -> DVector<f64> {
    DVector::from_fn(n * g.num_slots(), |r, _| {
        effective_beta_probability(model, g, r / n)
    })
}

/// Diagonal of `E[B (x) B]` in Kronecker order: entry `a K + b` is
/// `E[beta(slot(a)) beta(slot(b))]`. Analytic for the uniform model, Monte
/// Carlo over `MC_SAMPLES` draws otherwise.
pub fn expected_b_kron(model: &LossModel, g: &Graph, n: usize) -> Result<DVector<f64>> {
    let pair = match model {
        LossModel::Uniform { p_mu, .. } => {
            let pb = effective_beta_probability(model, g, 0);
            DMatrix::from_fn(g.num_slots(), g.num_slots(), |s, t| {
                if s == t {
                    pb
                } else if g.slot_pair(s).1 == g.slot_pair(t).1 {
                    // both packets need the same origin awake
                    pb * pb / p_mu
                } else {
                    pb * pb
                }
            })
        }
        LossModel::PerEdge { .. } => {
            let (pair, se) = pair_probabilities_mc(model, g, MC_SAMPLES);
            if se > MC_MAX_STD_ERROR {
                return Err(Error::EstimatorVarianceTooHigh(se));
            }
            pair
        }
    };
    Ok(kron_diagonal(&pair, n))
}

/// Expands a slot-pair table to the `(nM)^2` Kronecker diagonal.
pub fn kron_diagonal(pair: &DMatrix<f64>, n: usize) -> DVector<f64> {
    let k = n * pair.nrows();
    DVector::from_fn(k * k, |idx, _| pair[((idx / k) / n, (idx % k) / n)])
}

/// Empirical `P[beta(s) beta(t) = 1]` over `samples` draws, with the
/// largest standard error.
pub fn pair_probabilities_mc(model: &LossModel, g: &Graph, samples: u64) -> (DMatrix<f64>, f64) {
    let m = g.num_slots();
    let mut counts = vec![0u64; m * m];
    let mut on = Vec::with_capacity(m);
    for k in 0..samples {
        let e = draw_events(model, g, k);
        on.clear();
        on.extend((0..m).filter(|&s| e.beta[s]));
        for &s in &on {
            for &t in &on {
                counts[s * m + t] += 1;
            }
        }
    }
    let ns = samples as f64;
    let pair = DMatrix::from_fn(m, m, |s, t| counts[s * m + t] as f64 / ns);
    let se = pair
        .iter()
        .map(|&p| (p * (1.0 - p) / ns).sqrt())
        .fold(0.0, f64::max);
    (pair, se)
}

#[derive(Debug, Clone)]
pub struct RandomizedRateModel {
    pub eb: DVector<f64>,
    pub ebb: DVector<f64>,
    pub l: DMatrix<f64>,
    /// Eigenvalues of `L`, by decreasing modulus.
    pub spectrum: Vec<Complex<f64>>,
    /// Largest modulus among the eigenvalues of `L` different from 1.
    pub bar_gamma_m: f64,
    pub eig_one_count: usize,
}

/// `L = I(x)I - I(x)EB + I(x)EB T - EB(x)I + EB T(x)I + EBB (I-T)(x)(I-T)`.
pub fn build_l(
    model: &RateModel,
    eb: &DVector<f64>,
    ebb: &DVector<f64>,
) -> Result<RandomizedRateModel> {
    let k = model.dim();
    if eb.len() != k || ebb.len() != k * k {
        return Err(Error::DimensionMismatch(format!(
            "E[B] has {} entries and E[B(x)B] {}, expected {k} and {}",
            eb.len(),
            ebb.len(),
            k * k
        )));
    }
    let t = &model.t;
    let i_t = DMatrix::identity(k, k) - t;
    let mut l = i_t.kronecker(&i_t);
    for (r, mut row) in l.row_iter_mut().enumerate() {
        row *= ebb[r];
    }
    // remaining terms are sparse in one Kronecker factor; add them entrywise
    for a in 0..k {
        for b in 0..k {
            let r = a * k + b;
            l[(r, r)] += 1.0 - eb[b] - eb[a];
            for d in 0..k {
                l[(r, a * k + d)] += eb[b] * t[(b, d)];
            }
            for c in 0..k {
                l[(r, c * k + b)] += eb[a] * t[(a, c)];
            }
        }
    }
    let spectrum = sorted_spectrum(&l)?;
    let (eig_one_count, bar_gamma_m) = split_unit(&spectrum);
    Ok(RandomizedRateModel {
        eb: eb.clone(),
        ebb: ebb.clone(),
        l,
        spectrum,
        bar_gamma_m,
        eig_one_count,
    })
}

/// `E[B]`, `E[B (x) B]` and `L` for a loss model in one call.
pub fn randomized_rate_model(
    model: &RateModel,
    loss: &LossModel,
    g: &Graph,
) -> Result<RandomizedRateModel> {
    let eb = expected_b(loss, g, model.n);
    let ebb = expected_b_kron(loss, g, model.n)?;
    build_l(model, &eb, &ebb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    #[serde(rename = "gamma_M")]
    pub gamma_m: f64,
    #[serde(rename = "bar_gamma_M")]
    pub bar_gamma_m: f64,
    #[serde(rename = "sqrt_bar_gamma_M")]
    pub sqrt_bar_gamma_m: f64,
    pub eig_one_count: usize,
    #[serde(rename = "lemma2_pass")]
    pub spectrum_pass: bool,
    /// `[re, im]` pairs by decreasing modulus.
    #[serde(rename = "spectrum_T")]
    pub spectrum_t: Vec<[f64; 2]>,
    #[serde(rename = "top_eigs_L")]
    pub top_eigs_l: Vec<[f64; 2]>,
    pub zeta: f64,
    pub spectral_check: SpectralCheck,
}

pub const REPORT_TOP_L: usize = 10;

impl RateReport {
    pub fn new(model: &RateModel, randomized: &RandomizedRateModel) -> Self {
        let spectral_check = model.check_spectrum();
        let pairs = |v: &[Complex<f64>]| v.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>();
        RateReport {
            gamma_m: model.gamma_m,
            bar_gamma_m: randomized.bar_gamma_m,
            sqrt_bar_gamma_m: randomized.bar_gamma_m.sqrt(),
            eig_one_count: model.eig_one_count,
            spectrum_pass: spectral_check.pass(),
            spectrum_t: pairs(&model.spectrum),
            top_eigs_l: pairs(&randomized.spectrum[..randomized.spectrum.len().min(REPORT_TOP_L)]),
            zeta: model.zeta,
            spectral_check,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{centralized_solve, QuadraticCost};
    use crate::solver::{sync_step, SolverState};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn scalar_instance(g: &Graph, a: &[f64]) -> (Vec<SharedCost>, DVector<f64>) {
        let costs: Vec<SharedCost> = a
            .iter()
            .map(|&ai| Arc::new(QuadraticCost::scalar(1.0, ai).unwrap()) as SharedCost)
            .collect();
        assert_eq!(costs.len(), g.num_nodes());
        let xs = centralized_solve(&costs).unwrap();
        (costs, xs)
    }

    #[test]
    fn two_node_rate_is_one_minus_alpha() {
        let g = Graph::path(2).unwrap();
        let (costs, xs) = scalar_instance(&g, &[1.0, -2.0]);
        for alpha in [0.2, 0.5, 0.9] {
            let m = build_rate_model(&g, &costs, &Params::new(alpha, 1.0).unwrap(), &xs).unwrap();
            assert_abs_diff_eq!(
                (&m.t - DMatrix::identity(2, 2) * (1.0 - alpha)).amax(),
                0.0,
                epsilon = 1e-15
            );
            assert_abs_diff_eq!(m.gamma_m, 1.0 - alpha, epsilon = 1e-14);
            assert_eq!(m.eig_one_count, 0);
            let r = m.check_spectrum();
            assert!(r.pass() && r.symmetric && r.real_in_unit_interval);
        }
    }

    #[test]
    fn two_node_lifted_operator() {
        let g = Graph::path(2).unwrap();
        let (costs, xs) = scalar_instance(&g, &[0.0, 3.0]);
        let m = build_rate_model(&g, &costs, &Params::new(0.5, 1.0).unwrap(), &xs).unwrap();
        let r = randomized_rate_model(&m, &LossModel::lossless(), &g).unwrap();
        assert_abs_diff_eq!(
            (&r.l - DMatrix::identity(4, 4) * 0.25).amax(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(r.bar_gamma_m, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn path_graph_has_no_unit_eigenvalue() {
        // a tree has as many edges as the signless incidence has rank
        let g = Graph::path(3).unwrap();
        let (costs, xs) = scalar_instance(&g, &[1.0, 1.0, 1.0]);
        let m = build_rate_model(&g, &costs, &Params::new(0.6, 1.0).unwrap(), &xs).unwrap();
        assert_eq!(m.eig_one_count, g.cycle_rank());
        assert_eq!(m.eig_one_count, 0);
    }

    #[test]
    fn cycle_unit_eigenvectors_in_kernel() {
        let g = Graph::cycle(4).unwrap();
        let (costs, xs) = scalar_instance(&g, &[1.0, 2.0, 3.0, 4.0]);
        let m = build_rate_model(&g, &costs, &Params::new(0.6, 1.3).unwrap(), &xs).unwrap();
        assert_eq!(m.eig_one_count, 1);
        let r = m.check_spectrum();
        assert!(r.pass(), "{r:?}");
        assert!(r.disc_excess <= 1e-12);
    }

    #[test]
    fn fixed_point_is_invariant_and_optimal() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let costs: Vec<SharedCost> = (0..4)
            .map(|i| Arc::new(QuadraticCost::random(2, 8.0, 40 + i).unwrap()) as SharedCost)
            .collect();
        let xs = centralized_solve(&costs).unwrap();
        let p = Params::new(0.7, 0.9).unwrap();
        let m = build_rate_model(&g, &costs, &p, &xs).unwrap();
        let zbar = m.fixed_point_z().unwrap();
        let k = m.dim();
        assert!(((DMatrix::identity(k, k) - &m.t) * &zbar - &m.u).norm() <= 1e-10);
        let s = SolverState::with_z(&g, 2, zbar.clone()).unwrap();
        let s1 = sync_step(&s, &costs, &g, &p).unwrap();
        assert!((&s1.z - &zbar).amax() <= 1e-10);
        for i in 0..4 {
            assert!((s1.x.rows(2 * i, 2) - &xs).amax() <= 1e-8);
        }
        // shifting along the unit eigenspace keeps it fixed
        let v = m.unit_eigenspace().column(0).into_owned();
        let shifted = &zbar + v;
        assert!(((DMatrix::identity(k, k) - &m.t) * &shifted - &m.u).norm() <= 1e-8);
    }

    #[test]
    fn two_node_consensus_fixed_point() {
        let g = Graph::path(2).unwrap();
        let (costs, xs) = scalar_instance(&g, &[2.5, 2.5]);
        let m = build_rate_model(&g, &costs, &Params::new(0.4, 2.0).unwrap(), &xs).unwrap();
        let x = m.primal_from(&m.fixed_point_z().unwrap());
        assert_abs_diff_eq!(
            (x - DVector::from_element(2, 2.5)).amax(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_b_cases() {
        let g = Graph::path(3).unwrap();
        let eb = expected_b(&LossModel::uniform(1.0, 0.0, 0), &g, 2);
        assert!(eb.iter().all(|&v| v == 1.0) && eb.len() == 8);
        let eb = expected_b(&LossModel::uniform(0.8, 0.4, 0), &g, 1);
        assert!(eb.iter().all(|&v| (v - 0.48).abs() < 1e-15));
        let pe = LossModel::PerEdge {
            p_mu: vec![0.5, 1.0, 0.9],
            p_lambda: vec![0.0, 0.2, 0.1, 0.0],
            seed: 0,
        };
        let eb = expected_b(&pe, &g, 1);
        let want = [1.0, 0.5 * 0.8, 0.9 * 0.9, 1.0];
        for s in 0..4 {
            assert_abs_diff_eq!(eb[s], want[s], epsilon = 1e-15);
        }
    }

    #[test]
    fn kron_diagonal_case_values() {
        // star centred at 0: slots (1,0) and (2,0) share origin 0
        let g = Graph::new(3, &[(0, 1), (0, 2)]).unwrap();
        let (s1, s2) = (g.slot(1, 0).unwrap(), g.slot(2, 0).unwrap());
        let (s01, s02) = (g.slot(0, 1).unwrap(), g.slot(0, 2).unwrap());
        let k = g.num_slots();
        let at = |d: &DVector<f64>, a: usize, b: usize| d[a * k + b];

        let d = expected_b_kron(&LossModel::uniform(1.0, 0.0, 0), &g, 1).unwrap();
        assert!(d.iter().all(|&v| v == 1.0));

        let d = expected_b_kron(&LossModel::uniform(0.8, 0.0, 0), &g, 1).unwrap();
        assert_abs_diff_eq!(at(&d, s1, s1), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(at(&d, s1, s2), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(at(&d, s01, s02), 0.64, epsilon = 1e-15);

        let d = expected_b_kron(&LossModel::uniform(0.8, 0.4, 0), &g, 1).unwrap();
        assert_abs_diff_eq!(at(&d, s1, s1), 0.48, epsilon = 1e-15);
        assert_abs_diff_eq!(at(&d, s1, s2), 0.288, epsilon = 1e-15);
        assert_abs_diff_eq!(at(&d, s01, s02), 0.2304, epsilon = 1e-15);
        assert_abs_diff_eq!(at(&d, s01, s1), 0.2304, epsilon = 1e-15);
    }

    #[test]
    fn kron_diagonal_expands_blocks() {
        let pair = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = kron_diagonal(&pair, 2);
        // K = 4; entry (a, b) -> pair[a/2, b/2]
        assert_eq!(d[0], 1.0);
        assert_eq!(d[3], 2.0);
        assert_eq!(d[2 * 4 + 1], 3.0);
        assert_eq!(d[15], 4.0);
    }

    #[test]
    fn build_l_rejects_bad_dimensions() {
        let g = Graph::path(2).unwrap();
        let (costs, xs) = scalar_instance(&g, &[0.0, 1.0]);
        let m = build_rate_model(&g, &costs, &Params::new(0.5, 1.0).unwrap(), &xs).unwrap();
        let err = build_l(
            &m,
            &DVector::from_element(3, 1.0),
            &DVector::from_element(4, 1.0),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn report_json_keys() {
        let g = Graph::cycle(3).unwrap();
        let (costs, xs) = scalar_instance(&g, &[0.0, 1.0, 5.0]);
        let m = build_rate_model(&g, &costs, &Params::new(0.5, 1.0).unwrap(), &xs).unwrap();
        let r = randomized_rate_model(&m, &LossModel::uniform(1.0, 0.3, 0), &g).unwrap();
        let v = serde_json::to_value(RateReport::new(&m, &r)).unwrap();
        for key in [
            "gamma_M",
            "bar_gamma_M",
            "sqrt_bar_gamma_M",
            "eig_one_count",
            "lemma2_pass",
            "spectrum_T",
            "top_eigs_L",
            "zeta",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["spectrum_T"].as_array().unwrap().len(), 6);
    }
}
