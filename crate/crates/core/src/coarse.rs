//! Global multiscale spaces, the coarse saddle-point solve, inf-sup
//! estimates and error measures.
//!
//! Coarse basis functions are kept as sparse vectors in the fine numbering
//! together with a cell bounding box of their support, so that Galerkin
//! products only visit overlapping pairs.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::decomposition::Decomposition;
use crate::fem::{
    assemble_augmented, assemble_div, assemble_mass, rt_interpolate_scaled, CoefficientField,
};
use crate::local_basis::LocalBasis;
use crate::mesh::{CellRect, CellRegion, FineMesh, RegionDofs};
use crate::saddle::{solve_saddle, PressureGauge, SaddleProblem, SolveReport};
use crate::sparse::SparseOperator;
use crate::{Error, Result};

/// Fine-scale operators and data shared by the reference and coarse solves.
#[derive(Debug, Clone)]
pub struct FineSystem {
    pub mesh: FineMesh,
    pub mass: SparseOperator,
    pub div: SparseOperator,
    pub augmented: SparseOperator,
    pub gamma: f64,
    /// Source values per cell.
    pub f: Vec<f64>,
}

impl FineSystem {
    pub fn new(mesh: &FineMesh, coeff: &CoefficientField, f: Vec<f64>, gamma: f64) -> Result<Self> {
        if f.len() != mesh.num_cells() {
            return Err(Error::InvalidInput("source needs one value per cell".into()));
        }
        let dofs = RegionDofs::new(mesh, &CellRegion::whole(mesh));
        let mass = assemble_mass(mesh, coeff, &dofs)?;
        let div = assemble_div(mesh, &dofs);
        let augmented = assemble_augmented(mesh, &mass, &div, gamma)?;
        Ok(FineSystem { mesh: mesh.clone(), mass, div, augmented, gamma, f })
    }

    /// Same coefficient, different augmentation parameter.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let augmented = assemble_augmented(&self.mesh, &self.mass, &self.div, gamma)?;
        Ok(FineSystem { augmented, gamma, ..self.clone() })
    }

    /// `(f, q)` per cell.
    pub fn load(&self) -> Vec<f64> {
        let area = self.mesh.cell_area();
        self.f.iter().map(|v| v * area).collect()
    }

    /// Velocity right side `-gamma b(v, f)`.
    pub fn velocity_rhs(&self) -> Vec<f64> {
        self.div.mul_transpose_vec(&self.f).into_iter().map(|v| -self.gamma * v).collect()
    }

    /// Reference solution of the augmented fine problem.
    pub fn solve(&self, tol: f64) -> Result<FineSolution> {
        let mesh = &self.mesh;
        let constrained = (0..mesh.num_edges()).filter(|&e| mesh.is_boundary_edge(e)).map(|e| (e, 0.0)).collect();
        let sol = solve_saddle(
            &SaddleProblem {
                a: &self.augmented,
                b: &self.div,
                rhs_u: self.velocity_rhs(),
                rhs_p: self.load().into_iter().map(|v| -v).collect(),
                constrained,
                gauge: PressureGauge::MeanZeroLagrange,
                weights: None,
            },
            tol,
        )?;
        Ok(FineSolution { u: sol.u, p: sol.p, report: sol.report })
    }
}

#[derive(Debug, Clone)]
pub struct FineSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub report: SolveReport,
}

/// A coarse basis function in fine degrees of freedom.
#[derive(Debug, Clone)]
pub struct SparseColumn {
    pub entries: Vec<(usize, f64)>,
    /// Cells covering the support.
    pub support: CellRect,
}

impl SparseColumn {
    fn from_local(values: &[f64], globals: &[usize], support: CellRect) -> Self {
        let entries = globals.iter().zip(values).filter(|(_, v)| **v != 0.0).map(|(&g, &v)| (g, v)).collect();
        SparseColumn { entries, support }
    }

    fn scale(&mut self, s: f64) {
        self.entries.iter_mut().for_each(|(_, v)| *v *= s);
    }

    fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(k, v)| v * dense[k]).sum()
    }

    pub fn add_to(&self, coef: f64, out: &mut [f64]) {
        for &(k, v) in &self.entries {
            out[k] += coef * v;
        }
    }

    fn near(&self, other: &CellRect) -> bool {
        let a = &self.support;
        a.i0 <= other.i1 && other.i0 <= a.i1 && a.j0 <= other.j1 && other.j0 <= a.j1
    }
}

/// Which optional components enter the coarse spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceFlags {
    pub with_enrichment: bool,
    /// Coarse RT0 velocities together with the block-indicator pressures.
    pub with_coarse_rt: bool,
}

impl Default for SpaceFlags {
    fn default() -> Self {
        SpaceFlags { with_enrichment: true, with_coarse_rt: true }
    }
}

#[derive(Debug, Clone)]
pub struct CoarseSpaces {
    pub sv: Vec<SparseColumn>,
    pub ven: Vec<SparseColumn>,
    pub vrt: Vec<SparseColumn>,
    pub sp: Vec<SparseColumn>,
    pub qrt: Vec<SparseColumn>,
    pub u_par: Vec<f64>,
    pub p_par: Vec<f64>,
    pub flags: SpaceFlags,
}

impl CoarseSpaces {
    pub fn velocity_columns(&self) -> Vec<&SparseColumn> {
        self.sv.iter().chain(&self.ven).chain(&self.vrt).collect()
    }

    pub fn pressure_columns(&self) -> Vec<&SparseColumn> {
        self.sp.iter().chain(&self.qrt).collect()
    }

    pub fn num_velocity(&self) -> usize {
        self.sv.len() + self.ven.len() + self.vrt.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.sp.len() + self.qrt.len()
    }

    /// Coarse unknowns: velocity plus pressure columns.
    pub fn dof_count(&self) -> usize {
        self.num_velocity() + self.num_pressure()
    }
}

fn edge_support(mesh: &FineMesh, rect: CellRect) -> CellRect {
    // edges on the rectangle boundary touch the neighbouring cell ring
    rect.grow(1, mesh)
}

/// `sum_i Pi_h(chi_i u_par_i)` and the block-wise pressures, shifted to zero
/// global mean.
pub fn assemble_global_particular(
    mesh: &FineMesh,
    locals: &[LocalBasis],
    decomp: &Decomposition,
) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; mesh.num_edges()];
    let mut p = vec![0.0; mesh.num_cells()];
    for lb in locals {
        let chi = &decomp.pou[lb.index];
        let glued = rt_interpolate_scaled(mesh, chi, &lb.particular.u_par, &lb.omega_dofs);
        for (k, &e) in lb.omega_dofs.edges.iter().enumerate() {
            u[e] += glued[k];
        }
        for (k, &c) in lb.omega0_dofs.cells.iter().enumerate() {
            p[c] += lb.particular.p_par[k];
        }
    }
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    (u, p)
}

/// Coarse RT0 functions on the `m x m` block grid, one per interior block
/// edge, with unit flux through that edge.
fn coarse_rt_columns(mesh: &FineMesh, decomp: &Decomposition) -> Vec<SparseColumn> {
    let m = decomp.m;
    let (sx, sy) = (mesh.n_x() / m, mesh.n_y() / m);
    let mut cols = Vec::new();
    // vertical block edges at x = bi * sx, rows bj
    for bj in 0..m {
        for bi in 1..m {
            let xe = bi * sx;
            let mut entries = Vec::new();
            for j in bj * sy..(bj + 1) * sy {
                for i in xe - sx..=xe + sx {
                    let w = 1.0 - (i as f64 - xe as f64).abs() / sx as f64;
                    if w > 0.0 {
                        // flux through a fine edge: u_x h_y with u_x = w / (H_x H_y)
                        entries.push((mesh.vertical_edge(i, j), w / sy as f64));
                    }
                }
            }
            entries.sort_unstable_by_key(|&(k, _)| k);
            let support = CellRect { i0: xe - sx, i1: xe + sx, j0: bj * sy, j1: (bj + 1) * sy };
            cols.push(SparseColumn { entries, support: edge_support(mesh, support) });
        }
    }
    for bj in 1..m {
        for bi in 0..m {
            let ye = bj * sy;
            let mut entries = Vec::new();
            for j in ye - sy..=ye + sy {
                let w = 1.0 - (j as f64 - ye as f64).abs() / sy as f64;
                if w <= 0.0 {
                    continue;
                }
                for i in bi * sx..(bi + 1) * sx {
                    entries.push((mesh.horizontal_edge(i, j), w / sx as f64));
                }
            }
            entries.sort_unstable_by_key(|&(k, _)| k);
            let support = CellRect { i0: bi * sx, i1: (bi + 1) * sx, j0: ye - sy, j1: ye + sy };
            cols.push(SparseColumn { entries, support: edge_support(mesh, support) });
        }
    }
    cols
}

fn normalize_all(cols: &mut [SparseColumn], norm: impl Fn(&SparseColumn) -> f64 + Sync) {
    cols.par_iter_mut().for_each(|c| {
        let n = norm(c);
        if n > 0.0 {
            c.scale(1.0 / n);
        }
    });
}

/// Energy norm of a sparse column under a symmetric operator.
fn operator_norm(op: &SparseOperator, c: &SparseColumn) -> f64 {
    let mut s = 0.0;
    let pos: std::collections::HashMap<usize, f64> = c.entries.iter().copied().collect();
    for &(k, v) in &c.entries {
        let (cols, vals) = op.row(k);
        for (&j, &a) in cols.iter().zip(vals) {
            if let Some(w) = pos.get(&j) {
                s += v * a * w;
            }
        }
    }
    s.max(0.0).sqrt()
}

pub fn assemble_coarse_spaces(
    fine: &FineSystem,
    locals: &[LocalBasis],
    decomp: &Decomposition,
    flags: SpaceFlags,
) -> Result<CoarseSpaces> {
    let mesh = &fine.mesh;
    if locals.len() != decomp.len() {
        return Err(Error::InvalidInput(format!(
            "{} local bases for {} subdomains",
            locals.len(),
            decomp.len()
        )));
    }
    for lb in locals {
        let n = lb.n_loc();
        if lb.pressures.pressures.len() != n || lb.enrichment.fields.len() != n {
            return Err(Error::InvalidInput(format!("subdomain {}: inconsistent local basis sizes", lb.index)));
        }
    }
    let (u_par, p_par) = assemble_global_particular(mesh, locals, decomp);
    let per_sub: Vec<(Vec<SparseColumn>, Vec<SparseColumn>, Vec<SparseColumn>)> = locals
        .par_iter()
        .map(|lb| {
            let i = lb.index;
            let chi = &decomp.pou[i];
            let omega_support = edge_support(mesh, decomp.omega_rects[i]);
            let block_support = edge_support(mesh, decomp.omega0_rects[i]);
            let sv = lb
                .velocity
                .modes
                .iter()
                .map(|v| {
                    let glued = rt_interpolate_scaled(mesh, chi, v, &lb.omega_dofs);
                    SparseColumn::from_local(&glued, &lb.omega_dofs.edges, omega_support)
                })
                .collect();
            let ven = if flags.with_enrichment {
                lb.enrichment
                    .fields
                    .iter()
                    .map(|u| SparseColumn::from_local(u, &lb.omega0_dofs.edges, block_support))
                    .collect()
            } else {
                Vec::new()
            };
            let sp = lb
                .pressures
                .pressures
                .iter()
                .map(|p| SparseColumn::from_local(p, &lb.omega0_dofs.cells, decomp.omega0_rects[i]))
                .collect();
            (sv, ven, sp)
        })
        .collect();
    let mut sv = Vec::new();
    let mut ven = Vec::new();
    let mut sp = Vec::new();
    for (a, b, c) in per_sub {
        sv.extend(a);
        ven.extend(b);
        sp.extend(c);
    }
    let (vrt, qrt) = if flags.with_coarse_rt {
        let q = (0..decomp.len())
            .map(|i| {
                let ones = vec![1.0; decomp.omega0[i].len()];
                SparseColumn::from_local(&ones, decomp.omega0[i].cells(), decomp.omega0_rects[i])
            })
            .collect();
        (coarse_rt_columns(mesh, decomp), q)
    } else {
        (Vec::new(), Vec::new())
    };
    let mut spaces = CoarseSpaces { sv, ven, vrt, sp, qrt, u_par, p_par, flags };
    let area = mesh.cell_area();
    let l2 = |c: &SparseColumn| (c.entries.iter().map(|(_, v)| v * v).sum::<f64>() * area).sqrt();
    for cols in [&mut spaces.sv, &mut spaces.ven, &mut spaces.vrt] {
        normalize_all(cols, |c| operator_norm(&fine.mass, c));
    }
    for cols in [&mut spaces.sp, &mut spaces.qrt] {
        normalize_all(cols, l2);
    }
    Ok(spaces)
}

/// Dense `left^T op right`, visiting only pairs with overlapping supports.
fn galerkin(op: &SparseOperator, left: &[&SparseColumn], right: &[&SparseColumn], mesh: &FineMesh) -> Mat<f64> {
    let op_t = op.transpose();
    let columns: Vec<Vec<f64>> = right
        .par_iter()
        .map_init(
            || (vec![0.0; op.nrows()], Vec::<usize>::new()),
            |(scratch, touched), col| {
                for &(k, v) in &col.entries {
                    let (rows, vals) = op_t.row(k);
                    for (&r, &a) in rows.iter().zip(vals) {
                        if scratch[r] == 0.0 {
                            touched.push(r);
                        }
                        scratch[r] += a * v;
                    }
                }
                let reach = col.support.grow(1, mesh);
                let out = left.iter().map(|l| if l.near(&reach) { l.dot(scratch) } else { 0.0 }).collect();
                for &r in touched.iter() {
                    scratch[r] = 0.0;
                }
                touched.clear();
                out
            },
        )
        .collect();
    Mat::from_fn(left.len(), right.len(), |i, j| columns[j][i])
}

#[derive(Debug, Clone)]
pub struct GfemSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub coarse_dof_count: usize,
    pub coarse_velocity: Vec<f64>,
    pub coarse_pressure: Vec<f64>,
    /// Relative residual of the coarse system.
    pub residual: f64,
    /// Smallest over largest pivot of the full-pivot factorization.
    pub pivot_ratio: f64,
}

/// Pivot ratio below which the coarse matrix is treated as exactly singular.
pub const RANK_GUARD: f64 = 1e-15;

/// Galerkin projection of the augmented fine problem onto
/// `u_par + V`, `p_par + Q`, with one multiplier for the pressure mean.
pub fn solve_gfem(fine: &FineSystem, spaces: &CoarseSpaces, tol: f64) -> Result<GfemSolution> {
    let mesh = &fine.mesh;
    let v = spaces.velocity_columns();
    let q = spaces.pressure_columns();
    let (nv, nq) = (v.len(), q.len());
    let g = galerkin(&fine.augmented, &v, &v, mesh);
    let c = galerkin(&fine.div, &q, &v, mesh);
    let area = mesh.cell_area();
    let weights: Vec<f64> = q.iter().map(|col| col.entries.iter().map(|(_, v)| v * area).sum()).collect();
    let has_mean = weights.iter().any(|w| w.abs() > 1e-12);

    let mut r_u = fine.velocity_rhs();
    let au = fine.augmented.mul_vec(&spaces.u_par);
    let bp = fine.div.mul_transpose_vec(&spaces.p_par);
    for k in 0..r_u.len() {
        r_u[k] -= au[k] + bp[k];
    }
    let load = fine.load();
    let bu = fine.div.mul_vec(&spaces.u_par);
    let r_p: Vec<f64> = load.iter().zip(&bu).map(|(f, b)| -f - b).collect();

    let dim = nv + nq + usize::from(has_mean);
    let mut k = Mat::<f64>::zeros(dim, dim);
    let mut rhs = Mat::<f64>::zeros(dim, 1);
    for i in 0..nv {
        for j in 0..nv {
            k[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)]);
        }
        rhs[(i, 0)] = v[i].dot(&r_u);
    }
    for a in 0..nq {
        for j in 0..nv {
            k[(nv + a, j)] = c[(a, j)];
            k[(j, nv + a)] = c[(a, j)];
        }
        rhs[(nv + a, 0)] = q[a].dot(&r_p);
        if has_mean {
            k[(nv + a, dim - 1)] = weights[a];
            k[(dim - 1, nv + a)] = weights[a];
        }
    }
    let mut pivot_ratio = 1.0;
    let mut x = Mat::<f64>::zeros(dim, 1);
    let mut residual = 0.0;
    if dim > 0 {
        let lu = k.full_piv_lu();
        let diag: Vec<f64> = (0..dim).map(|i| lu.U()[(i, i)].abs()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        pivot_ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(pivot_ratio > RANK_GUARD) {
            return Err(Error::Singular(format!(
                "coarse system is rank deficient (pivot ratio {pivot_ratio:.3e}); \
                 missing enrichment or duplicate columns"
            )));
        }
        x = lu.solve(&rhs);
        let rhs_norm = rhs.norm_l2();
        for _ in 0..2 {
            let r = &rhs - &k * &x;
            residual = if rhs_norm > 0.0 { r.norm_l2() / rhs_norm } else { r.norm_l2() };
            if residual <= tol * 1e-3 {
                break;
            }
            x += lu.solve(&r);
        }
        let r = &rhs - &k * &x;
        residual = if rhs_norm > 0.0 { r.norm_l2() / rhs_norm } else { r.norm_l2() };
        if !residual.is_finite() {
            return Err(Error::Singular("coarse solve produced non-finite values".into()));
        }
    }
    let coarse_velocity: Vec<f64> = (0..nv).map(|i| x[(i, 0)]).collect();
    let coarse_pressure: Vec<f64> = (0..nq).map(|a| x[(nv + a, 0)]).collect();
    let mut u = spaces.u_par.clone();
    for (col, &xi) in v.iter().zip(&coarse_velocity) {
        col.add_to(xi, &mut u);
    }
    let mut p = spaces.p_par.clone();
    for (col, &ya) in q.iter().zip(&coarse_pressure) {
        col.add_to(ya, &mut p);
    }
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.iter_mut().for_each(|x| *x -= mean);
    Ok(GfemSolution {
        u,
        p,
        coarse_dof_count: spaces.dof_count(),
        coarse_velocity,
        coarse_pressure,
        residual,
        pivot_ratio,
    })
}

/// Orthonormalizing coordinates for a Gram matrix, dropping directions whose
/// eigenvalue falls below `rel` times the largest.
fn orthonormal_coords(gram: &Mat<f64>, rel: f64) -> Result<Mat<f64>> {
    let n = gram.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let max = (0..n).map(|k| s[k]).fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&k| s[k] > rel * max).collect();
    let u = evd.U();
    Ok(Mat::from_fn(n, keep.len(), |i, c| u[(i, keep[c])] / s[keep[c]].sqrt()))
}

/// Largest dense size `estimate_infsup` accepts.
pub const INFSUP_MAX_COLUMNS: usize = 4000;

/// `min_p max_u b(u, p) / (||u||_{H(div;a)} ||p||)` over the coarse spaces,
/// with pressures restricted to zero mean.
pub fn estimate_infsup(fine: &FineSystem, spaces: &CoarseSpaces) -> Result<f64> {
    let mesh = &fine.mesh;
    let v = spaces.velocity_columns();
    let q = spaces.pressure_columns();
    if v.len() + q.len() > INFSUP_MAX_COLUMNS {
        return Err(Error::InvalidInput(format!(
            "inf-sup estimate limited to {INFSUP_MAX_COLUMNS} columns, got {}",
            v.len() + q.len()
        )));
    }
    if q.is_empty() {
        return Ok(f64::INFINITY);
    }
    let hdiv = assemble_augmented(mesh, &fine.mass, &fine.div, 1.0)?;
    let gu = galerkin(&hdiv, &v, &v, mesh);
    let c = galerkin(&fine.div, &q, &v, mesh);
    let area = mesh.cell_area();
    let nq = q.len();
    let cells = SparseOperator::from_triplets(
        mesh.num_cells(),
        mesh.num_cells(),
        (0..mesh.num_cells()).map(|k| (k, k, area)).collect(),
        crate::sparse::DofKind::Cell,
        crate::sparse::DofKind::Cell,
    );
    let gp = galerkin(&cells, &q, &q, mesh);
    // restrict to the zero-mean pressures
    let w = Mat::from_fn(nq, 1, |a, _| q[a].entries.iter().map(|(_, v)| v * area).sum::<f64>());
    let z = if w.norm_l2() > 1e-12 {
        let wn = &w * faer::Scale(1.0 / w.norm_l2());
        // orthogonal complement of w via the eigenvectors of I - w w^T
        let proj = Mat::<f64>::identity(nq, nq) - &wn * wn.transpose();
        orthonormal_coords(&proj, 0.5)?
    } else {
        Mat::<f64>::identity(nq, nq)
    };
    let gp_z = z.transpose() * &gp * &z;
    let xp = &z * orthonormal_coords(&gp_z, 1e-12)?;
    let xu = orthonormal_coords(&gu, 1e-12)?;
    if xp.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    if xp.ncols() > xu.ncols() {
        return Ok(0.0);
    }
    let s = xp.transpose() * &c * &xu;
    let sv = s.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(sv.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrors {
    pub velocity: f64,
    pub pressure: f64,
    pub divergence: f64,
}

fn relative(diff: f64, reference: f64, what: &str) -> Result<f64> {
    if reference > 0.0 {
        Ok(diff / reference)
    } else if diff == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::InvalidInput(format!("zero reference {what} norm")))
    }
}

/// Errors of `(u, p)` against the fine reference: weighted velocity norm,
/// plain pressure norm and the norm of the cell divergence.
pub fn compute_errors(fine: &FineSystem, reference: (&[f64], &[f64]), approx: (&[f64], &[f64])) -> Result<RelativeErrors> {
    let area = fine.mesh.cell_area();
    let du: Vec<f64> = approx.0.iter().zip(reference.0).map(|(a, b)| a - b).collect();
    let dp: Vec<f64> = approx.1.iter().zip(reference.1).map(|(a, b)| a - b).collect();
    let a_norm = |x: &[f64]| fine.mass.form(x, x).max(0.0).sqrt();
    let l2 = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
    let div_norm = |x: &[f64]| (fine.div.mul_vec(x).iter().map(|d| d * d / area).sum::<f64>()).sqrt();
    Ok(RelativeErrors {
        velocity: relative(a_norm(&du), a_norm(reference.0), "velocity")?,
        pressure: relative(l2(&dp), l2(reference.1), "pressure")?,
        divergence: relative(div_norm(&du), div_norm(reference.0), "divergence")?,
    })
}

/// `max_i |int_{omega0_i} div u + int_{omega0_i} f|`.
pub fn mass_balance_defect(fine: &FineSystem, decomp: &Decomposition, u: &[f64]) -> f64 {
    let div = fine.div.mul_vec(u);
    let load = fine.load();
    decomp
        .omega0
        .iter()
        .map(|block| block.cells().iter().map(|&c| div[c] + load[c]).sum::<f64>().abs())
        .fold(0.0, f64::max)
}
