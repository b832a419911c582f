//! Saddle-point solves `[A B^T; B 0] [u; p] = [f; g]` with prescribed edge
//! fluxes, and the dense generalized eigensolver used by the local spectral
//! problems.
//!
//! The mean-zero pressure gauge is realized by eliminating the constant
//! pressure kernel: the multiplier of the bordered system is computed in
//! closed form, the remaining consistent system is solved with one pressure
//! pinned and the result shifted to zero weighted mean. This is algebraically
//! identical to the bordered system but keeps the sparse factorization local.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};

use crate::sparse::{DofKind, SparseOperator};
use crate::{Error, Result};

/// How the pressure null space is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PressureGauge {
    /// Pressure is already unique (some boundary is pressure-controlled).
    None,
    /// Zero weighted mean, with the compatibility multiplier eliminated.
    #[default]
    MeanZeroLagrange,
    /// Fix the last pressure to zero, then shift to zero weighted mean.
    PinThenShift,
}

/// One saddle-point instance.
#[derive(Debug, Clone)]
pub struct SaddleProblem<'a> {
    pub a: &'a SparseOperator,
    pub b: &'a SparseOperator,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Edges with prescribed flux, and the values.
    pub constrained: Vec<(usize, f64)>,
    pub gauge: PressureGauge,
    /// Pressure weights for the mean (cell areas); uniform if `None`.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Relative residual of the reduced system after refinement.
    pub residual: f64,
    pub refinements: usize,
    /// Compatibility defect removed by the gauge (zero without a gauge).
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub report: SolveReport,
}

/// Relative tolerance on the compatibility defect, measured against the
/// size of the pressure right side.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// A factorized saddle system for a fixed operator pair, constraint set and
/// gauge; any number of right sides can be solved against it.
pub struct SaddleSystem {
    n_edges: usize,
    n_cells: usize,
    free_edges: Vec<usize>,
    constrained: Vec<usize>,
    is_constrained: Vec<bool>,
    kept_cells: Vec<usize>,
    gauge: PressureGauge,
    weights: Vec<f64>,
    reduced: SparseOperator,
    a: SparseOperator,
    b: SparseOperator,
    lu: Lu<usize, f64>,
}

impl SaddleSystem {
    pub fn factor(
        a: &SparseOperator,
        b: &SparseOperator,
        constrained_edges: &[usize],
        gauge: PressureGauge,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (ne, nc) = (a.nrows(), b.nrows());
        if a.ncols() != ne || b.ncols() != ne {
            return Err(Error::InvalidInput(format!(
                "saddle blocks do not match: A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; nc]);
        if weights.len() != nc || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("pressure weights must be positive, one per cell".into()));
        }
        let mut is_constrained = vec![false; ne];
        for &e in constrained_edges {
            if e >= ne {
                return Err(Error::InvalidInput(format!("constrained edge {e} out of range")));
            }
            is_constrained[e] = true;
        }
        let free_edges: Vec<usize> = (0..ne).filter(|&e| !is_constrained[e]).collect();
        let constrained: Vec<usize> = (0..ne).filter(|&e| is_constrained[e]).collect();

        let kept_cells: Vec<usize> = match gauge {
            PressureGauge::None => (0..nc).collect(),
            _ => {
                if nc == 0 {
                    return Err(Error::InvalidInput("pressure gauge on an empty cell set".into()));
                }
                // the constant pressure must be a kernel vector: every free
                // edge is shared by two cells with opposite signs
                let col_sums = b.mul_transpose_vec(&vec![1.0; nc]);
                if let Some(&e) = free_edges.iter().find(|&&e| col_sums[e].abs() > 1e-12) {
                    return Err(Error::InvalidInput(format!(
                        "pressure gauge requested but boundary edge {e} is free"
                    )));
                }
                let pinned = match gauge {
                    PressureGauge::PinThenShift => nc - 1,
                    _ => 0,
                };
                (0..nc).filter(|&c| c != pinned).collect()
            }
        };

        let nf = free_edges.len();
        let np = kept_cells.len();
        let mut edge_pos = vec![usize::MAX; ne];
        for (k, &e) in free_edges.iter().enumerate() {
            edge_pos[e] = k;
        }
        let mut t = Vec::with_capacity(a.nnz() + 2 * b.nnz());
        for (r, c, v) in a.triplets() {
            if edge_pos[r] != usize::MAX && edge_pos[c] != usize::MAX {
                t.push((edge_pos[r], edge_pos[c], v));
            }
        }
        for (k, &cell) in kept_cells.iter().enumerate() {
            let (cols, vals) = b.row(cell);
            for (&e, &v) in cols.iter().zip(vals) {
                if edge_pos[e] != usize::MAX {
                    t.push((nf + k, edge_pos[e], v));
                    t.push((edge_pos[e], nf + k, v));
                }
            }
        }
        let reduced = SparseOperator::from_triplets(nf + np, nf + np, t, DofKind::Generic, DofKind::Generic);
        let lu = reduced
            .to_faer()
            .sp_lu()
            .map_err(|e| Error::Singular(format!("saddle factorization failed: {e:?}")))?;
        Ok(SaddleSystem {
            n_edges: ne,
            n_cells: nc,
            free_edges,
            constrained,
            is_constrained,
            kept_cells,
            gauge,
            weights,
            reduced,
            a: a.clone(),
            b: b.clone(),
            lu,
        })
    }

    pub fn num_unknowns(&self) -> usize {
        self.reduced.nrows()
    }

    /// Solves for one right side. `prescribed` holds the flux of every
    /// constrained edge, in the order of increasing edge index.
    pub fn solve(
        &self,
        rhs_u: &[f64],
        rhs_p: &[f64],
        prescribed: &[f64],
        tol: f64,
    ) -> Result<SaddleSolution> {
        let (ne, nc) = (self.n_edges, self.n_cells);
        if rhs_u.len() != ne || rhs_p.len() != nc || prescribed.len() != self.constrained.len() {
            return Err(Error::InvalidInput("right side dimensions do not match the system".into()));
        }
        let mut g = vec![0.0; ne];
        for (&e, &v) in self.constrained.iter().zip(prescribed) {
            g[e] = v;
        }
        let ag = self.a.mul_vec(&g);
        let bg = self.b.mul_vec(&g);
        let ru: Vec<f64> = (0..ne).map(|e| rhs_u[e] - ag[e]).collect();
        let mut rp: Vec<f64> = (0..nc).map(|c| rhs_p[c] - bg[c]).collect();

        let mut defect = 0.0;
        if self.gauge != PressureGauge::None {
            let sum: f64 = rp.iter().sum();
            let scale: f64 = rhs_p.iter().map(|v| v.abs()).sum::<f64>()
                + bg.iter().map(|v| v.abs()).sum::<f64>();
            if sum.abs() > COMPATIBILITY_TOL * scale.max(f64::MIN_POSITIVE) && sum.abs() > 1e-300 {
                return Err(Error::Incompatible { defect: sum, tolerance: COMPATIBILITY_TOL * scale });
            }
            defect = sum;
            if self.gauge == PressureGauge::MeanZeroLagrange {
                let mu = sum / self.weights.iter().sum::<f64>();
                for (r, w) in rp.iter_mut().zip(&self.weights) {
                    *r -= mu * w;
                }
            }
        }

        let nf = self.free_edges.len();
        let mut rhs = Mat::<f64>::zeros(self.num_unknowns(), 1);
        for (k, &e) in self.free_edges.iter().enumerate() {
            rhs[(k, 0)] = ru[e];
        }
        for (k, &c) in self.kept_cells.iter().enumerate() {
            rhs[(nf + k, 0)] = rp[c];
        }
        let rhs_vec: Vec<f64> = (0..rhs.nrows()).map(|i| rhs[(i, 0)]).collect();
        let rhs_norm = rhs_vec.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut x = vec![0.0; rhs_vec.len()];
        let mut residual = 0.0;
        let mut refinements = 0;
        if rhs_norm > 0.0 {
            let mut r = rhs_vec.clone();
            for step in 0..4 {
                let rm = Mat::from_fn(r.len(), 1, |i, _| r[i]);
                let dx = self.lu.solve(&rm);
                for (xi, k) in x.iter_mut().zip(0..) {
                    *xi += dx[(k, 0)];
                }
                let kx = self.reduced.mul_vec(&x);
                r = rhs_vec.iter().zip(&kx).map(|(a, b)| a - b).collect();
                residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / rhs_norm;
                refinements = step;
                if !residual.is_finite() {
                    return Err(Error::Singular("saddle solve produced non-finite values".into()));
                }
                if residual <= tol.min(1e-12) {
                    break;
                }
            }
            if residual > tol {
                return Err(Error::Singular(format!(
                    "saddle residual {residual:.3e} exceeds tolerance {tol:.3e}"
                )));
            }
        }

        let mut u = g;
        for (k, &e) in self.free_edges.iter().enumerate() {
            u[e] = x[k];
        }
        let mut p = vec![0.0; nc];
        for (k, &c) in self.kept_cells.iter().enumerate() {
            p[c] = x[nf + k];
        }
        if self.gauge != PressureGauge::None {
            let wsum: f64 = self.weights.iter().sum();
            let mean = p.iter().zip(&self.weights).map(|(p, w)| p * w).sum::<f64>() / wsum;
            p.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(SaddleSolution { u, p, report: SolveReport { residual, refinements, defect } })
    }

    pub fn is_constrained(&self, e: usize) -> bool {
        self.is_constrained[e]
    }
}

/// Factorizes and solves a single problem.
pub fn solve_saddle(problem: &SaddleProblem, tol: f64) -> Result<SaddleSolution> {
    let edges: Vec<usize> = problem.constrained.iter().map(|&(e, _)| e).collect();
    let sys = SaddleSystem::factor(problem.a, problem.b, &edges, problem.gauge, problem.weights.clone())?;
    let mut values = problem.constrained.clone();
    values.sort_by_key(|&(e, _)| e);
    if values.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput("edge constrained twice".into()));
    }
    let prescribed: Vec<f64> = values.iter().map(|&(_, v)| v).collect();
    sys.solve(&problem.rhs_u, &problem.rhs_p, &prescribed, tol)
}

/// Sparse Cholesky factor of an SPD operator, for repeated solves.
pub struct SpdFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(k: &SparseOperator) -> Result<Self> {
        let llt = k
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(SpdFactor { llt, n: k.nrows() })
    }

    /// Solves for every column of `rhs`.
    pub fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        assert_eq!(rhs.nrows(), self.n);
        self.llt.solve(rhs)
    }
}

/// Generalized problem `K_big v = lambda K_small v` on a subspace whose
/// coordinates both (dense) forms are already expressed in.
#[derive(Debug, Clone)]
pub struct EigenProblem {
    pub stiffness_big: Mat<f64>,
    pub stiffness_small: Mat<f64>,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// All eigenvalues of the pencil, ascending.
    pub eigenvalues: Vec<f64>,
    /// First `count` eigenvectors as columns, normalized in `K_small`.
    pub vectors: Mat<f64>,
}

impl EigenPairs {
    /// `d_n = lambda_{n+1}^{-1/2}`, if that eigenvalue exists.
    pub fn n_width(&self, n: usize) -> Option<f64> {
        self.eigenvalues.get(n).map(|l| l.powf(-0.5))
    }
}

/// Relative size below which the small form counts as singular.
const SMALL_FORM_EPS: f64 = 1e-13;

/// Dense solve of the pencil through the Cholesky factor of the big form:
/// `L^{-1} K_small L^{-T} y = mu y`, `lambda = 1 / mu`.
pub fn solve_generalized_eig(problem: &EigenProblem) -> Result<EigenPairs> {
    let n = problem.stiffness_big.nrows();
    if problem.stiffness_big.ncols() != n
        || problem.stiffness_small.nrows() != n
        || problem.stiffness_small.ncols() != n
    {
        return Err(Error::InvalidInput("eigenproblem forms must be square of equal size".into()));
    }
    if problem.count > n {
        return Err(Error::Eigen(format!(
            "requested {} eigenpairs from a subspace of dimension {n}",
            problem.count
        )));
    }
    if n == 0 {
        return Ok(EigenPairs { eigenvalues: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    let sym = |m: &Mat<f64>| Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let big = sym(&problem.stiffness_big);
    let small = sym(&problem.stiffness_small);
    let llt = big
        .llt(Side::Lower)
        .map_err(|e| Error::Eigen(format!("big form is not positive definite: {e:?}")))?;
    let l = llt.L();
    // C = L^{-1} S L^{-T}
    let mut tmp = small.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, tmp.as_mut(), faer::Par::Seq);
    let mut c = tmp.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), faer::Par::Seq);
    let c = sym(&c);
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mu_max = (0..n).map(|k| s[k]).fold(0.0f64, f64::max);
    // descending mu gives ascending lambda
    let order: Vec<usize> = (0..n).rev().collect();
    let needed = problem.count;
    if needed > 0 {
        let mu = s[order[needed - 1]];
        if !(mu > SMALL_FORM_EPS * mu_max.max(f64::MIN_POSITIVE)) {
            return Err(Error::Eigen(format!(
                "small form is numerically singular on the subspace (mu = {mu:.3e})"
            )));
        }
    }
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&k| {
            let mu = s[k];
            if mu > SMALL_FORM_EPS * mu_max { 1.0 / mu } else { f64::INFINITY }
        })
        .collect();
    let mut y = Mat::<f64>::zeros(n, needed);
    for (col, &k) in order.iter().take(needed).enumerate() {
        let scale = 1.0 / s[k].sqrt();
        for i in 0..n {
            y[(i, col)] = u[(i, k)] * scale;
        }
    }
    // v = L^{-T} y
    let lt = l.transpose();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(lt, y.as_mut(), faer::Par::Seq);
    // deterministic sign: largest-magnitude entry positive
    for col in 0..needed {
        let mut best = 0usize;
        for i in 0..n {
            if y[(i, col)].abs() > y[(best, col)].abs() {
                best = i;
            }
        }
        if y[(best, col)] < 0.0 {
            for i in 0..n {
                y[(i, col)] = -y[(i, col)];
            }
        }
    }
    Ok(EigenPairs { eigenvalues, vectors: y })
}
