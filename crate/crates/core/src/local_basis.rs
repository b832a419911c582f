//! Per-subdomain constructions: the particular pair, the discrete harmonic
//! space in stream-function form, the local spectral velocity basis, the
//! reconstructed pressures and the enrichment fields.
//!
//! Velocity vectors are stored in the local numbering of the overlapping
//! subdomain `omega`, pressures and enrichment fields in that of the coarse
//! block `omega0`.

use std::cell::OnceCell;
use std::collections::BTreeMap;

use faer::Mat;
use rayon::prelude::*;

use crate::decomposition::Decomposition;
use crate::fem::{
    assemble_div, assemble_mass, assemble_mass_on, curl_operator, CoefficientField,
};
use crate::mesh::{region_boundary_split, FineMesh, RegionDofs};
use crate::saddle::{
    solve_generalized_eig, EigenProblem, PressureGauge, SaddleSystem, SpdFactor,
};
use crate::sparse::SparseOperator;
use crate::{Error, Result};

/// Condition imposed on the interior boundary of the oversampling domain in
/// the particular problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParticularBc {
    /// Homogeneous pressure (natural condition).
    #[default]
    DirichletPressure,
    /// Uniform normal flux balancing the source.
    ConstantFlux,
}

#[derive(Debug, Clone)]
pub struct LocalParticular {
    /// Restriction of the local velocity to `omega`.
    pub u_par: Vec<f64>,
    /// Restriction of the local pressure to `omega0`, mean-zero.
    pub p_par: Vec<f64>,
    /// Full solution on the oversampling domain.
    pub psi_star: Vec<f64>,
    pub phi_star: Vec<f64>,
}

/// Generalized harmonic stream functions on the oversampling domain.
#[derive(Debug, Clone)]
pub struct HarmonicStreamSpace {
    /// Nodal basis (star nodes x dimension).
    pub streams: Mat<f64>,
    /// Their curls (star edges x dimension).
    pub velocities: Mat<f64>,
    /// Local star node indices in the interior of the oversampling domain.
    pub interior_nodes: Vec<usize>,
}

impl HarmonicStreamSpace {
    pub fn dim(&self) -> usize {
        self.velocities.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct LocalVelocityBasis {
    /// Modes restricted to `omega`.
    pub modes: Vec<Vec<f64>>,
    /// Modes on the oversampling domain.
    pub modes_star: Vec<Vec<f64>>,
    /// Every eigenvalue of the local pencil, ascending.
    pub eigenvalues: Vec<f64>,
}

impl LocalVelocityBasis {
    pub fn n_loc(&self) -> usize {
        self.modes.len()
    }

    /// `d_n = lambda_{n+1}^{-1/2}` when that eigenvalue exists.
    pub fn n_width(&self, n: usize) -> Option<f64> {
        self.eigenvalues.get(n).map(|l| l.powf(-0.5))
    }
}

#[derive(Debug, Clone)]
pub struct LocalPressureBasis {
    pub pressures: Vec<Vec<f64>>,
    /// Largest relative deviation between the recovered velocity and the
    /// mode it was reconstructed from.
    pub max_velocity_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct LocalEnrichment {
    pub fields: Vec<Vec<f64>>,
    /// `||u||_{H(div;a)} / ||p||` per field (zero for zero pressure).
    pub stability_ratios: Vec<f64>,
}

/// Everything one subdomain contributes to the coarse spaces.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub index: usize,
    pub omega_dofs: RegionDofs,
    pub omega0_dofs: RegionDofs,
    pub particular: LocalParticular,
    pub velocity: LocalVelocityBasis,
    pub pressures: LocalPressureBasis,
    pub enrichment: LocalEnrichment,
}

impl LocalBasis {
    pub fn n_loc(&self) -> usize {
        self.velocity.n_loc()
    }

    /// Keeps the first `n` modes and their derived functions.
    pub fn truncated(&self, n: usize) -> Result<LocalBasis> {
        if n > self.n_loc() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate {} local modes to {n}",
                self.n_loc()
            )));
        }
        let mut out = self.clone();
        out.velocity.modes.truncate(n);
        out.velocity.modes_star.truncate(n);
        out.pressures.pressures.truncate(n);
        out.enrichment.fields.truncate(n);
        out.enrichment.stability_ratios.truncate(n);
        Ok(out)
    }
}

/// Operators and numberings of one subdomain, assembled once.
pub struct LocalProblem<'a> {
    pub mesh: &'a FineMesh,
    pub coeff: &'a CoefficientField,
    pub decomp: &'a Decomposition,
    pub index: usize,
    pub tol: f64,
    pub star_dofs: RegionDofs,
    pub omega_dofs: RegionDofs,
    pub omega0_dofs: RegionDofs,
    pub star_mass: SparseOperator,
    pub star_div: SparseOperator,
    domain_boundary: Vec<usize>,
    interior_boundary: Vec<usize>,
    omega0_system: OnceCell<Omega0System>,
}

struct Omega0System {
    mass: SparseOperator,
    div: SparseOperator,
    boundary: Vec<usize>,
    system: SaddleSystem,
}

impl<'a> LocalProblem<'a> {
    pub fn new(
        mesh: &'a FineMesh,
        coeff: &'a CoefficientField,
        decomp: &'a Decomposition,
        index: usize,
        tol: f64,
    ) -> Result<Self> {
        if index >= decomp.len() {
            return Err(Error::InvalidInput(format!("no subdomain {index}")));
        }
        let star = &decomp.omega_star[index];
        let star_dofs = RegionDofs::new(mesh, star);
        let star_mass = assemble_mass(mesh, coeff, &star_dofs)?;
        let star_div = assemble_div(mesh, &star_dofs);
        let (domain_boundary, interior_boundary) = region_boundary_split(mesh, star)?;
        Ok(LocalProblem {
            mesh,
            coeff,
            decomp,
            index,
            tol,
            omega_dofs: RegionDofs::new(mesh, &decomp.omega[index]),
            omega0_dofs: RegionDofs::new(mesh, &decomp.omega0[index]),
            star_dofs,
            star_mass,
            star_div,
            domain_boundary,
            interior_boundary,
            omega0_system: OnceCell::new(),
        })
    }

    fn star_local_edges(&self, edges: &[usize]) -> Vec<usize> {
        edges.iter().map(|&e| self.star_dofs.local_edge(e).expect("boundary edge of the region")).collect()
    }

    /// Local mixed problem on the oversampling domain with source `f`
    /// (global cell values) and zero flux on the domain boundary.
    pub fn solve_particular(&self, f: &[f64], bc: ParticularBc) -> Result<LocalParticular> {
        let mesh = self.mesh;
        let area = mesh.cell_area();
        let rhs_p: Vec<f64> = self.star_dofs.cells.iter().map(|&c| -f[c] * area).collect();
        let rhs_u = vec![0.0; self.star_dofs.num_edges()];
        let mut constrained: Vec<(usize, f64)> =
            self.star_local_edges(&self.domain_boundary).into_iter().map(|e| (e, 0.0)).collect();
        let gauge = match bc {
            ParticularBc::DirichletPressure if !self.interior_boundary.is_empty() => PressureGauge::None,
            ParticularBc::DirichletPressure => PressureGauge::MeanZeroLagrange,
            ParticularBc::ConstantFlux => {
                if !self.interior_boundary.is_empty() {
                    let length: f64 = self.interior_boundary.iter().map(|&e| mesh.edge_length(e)).sum();
                    let source: f64 = self.star_dofs.cells.iter().map(|&c| f[c] * area).sum();
                    let c_comp = -source / length;
                    let star = &self.decomp.omega_star[self.index];
                    for &e in &self.interior_boundary {
                        // outward along the global normal when the region lies on the minus side
                        let sign = match mesh.edge_cells(e)[0] {
                            Some(c) if star.contains(c) => 1.0,
                            _ => -1.0,
                        };
                        let local = self.star_dofs.local_edge(e).expect("boundary edge of the region");
                        constrained.push((local, sign * c_comp * mesh.edge_length(e)));
                    }
                }
                PressureGauge::MeanZeroLagrange
            }
        };
        constrained.sort_by_key(|&(e, _)| e);
        let edges: Vec<usize> = constrained.iter().map(|&(e, _)| e).collect();
        let values: Vec<f64> = constrained.iter().map(|&(_, v)| v).collect();
        let sys = SaddleSystem::factor(&self.star_mass, &self.star_div, &edges, gauge, None)?;
        let sol = sys.solve(&rhs_u, &rhs_p, &values, self.tol)?;
        let u_par = self.star_dofs.transfer_edges(&sol.u, &self.omega_dofs);
        let mut p_par = self.star_dofs.transfer_cells(&sol.p, &self.omega0_dofs);
        subtract_mean(&mut p_par);
        Ok(LocalParticular { u_par, p_par, psi_star: sol.u, phi_star: sol.p })
    }

    /// Node groups on the boundary of the oversampling domain: each
    /// connected piece of the domain boundary moves as one value (zero
    /// normal flux there), every other boundary node is free.
    fn boundary_groups(&self) -> Vec<Vec<usize>> {
        let mesh = self.mesh;
        let local = |v: usize| self.star_dofs.local_node(v).expect("region node");
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<usize, usize>, v: usize) -> usize {
            let p = parent[&v];
            if p == v {
                return v;
            }
            let r = find(parent, p);
            parent.insert(v, r);
            r
        }
        for &e in &self.domain_boundary {
            let [a, b] = mesh.edge_nodes(e).map(local);
            parent.entry(a).or_insert(a);
            parent.entry(b).or_insert(b);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra.max(rb), ra.min(rb));
            }
        }
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let keys: Vec<usize> = parent.keys().copied().collect();
        for v in keys {
            let r = find(&mut parent, v);
            components.entry(r).or_default().push(v);
        }
        let mut groups: Vec<Vec<usize>> = components.into_values().collect();
        groups.sort_by_key(|g| g[0]);
        let mut interface: Vec<usize> = self
            .interior_boundary
            .iter()
            .flat_map(|&e| mesh.edge_nodes(e))
            .map(local)
            .filter(|v| !parent.contains_key(v))
            .collect();
        interface.sort_unstable();
        interface.dedup();
        groups.extend(interface.into_iter().map(|v| vec![v]));
        groups
    }

    /// Discrete a-harmonic divergence-free fields on the oversampling
    /// domain with zero flux on the domain boundary, as curls of harmonic
    /// extensions of the boundary groups (one group is the gauge).
    pub fn harmonic_space(&self) -> Result<HarmonicStreamSpace> {
        let nn = self.star_dofs.num_nodes();
        let curl = curl_operator(self.mesh, &self.star_dofs);
        let stiff = curl.transpose().matmul(&self.star_mass.matmul(&curl)?)?;
        let groups = self.boundary_groups();
        let mut is_boundary = vec![false; nn];
        for g in &groups {
            for &v in g {
                is_boundary[v] = true;
            }
        }
        let interior: Vec<usize> = (0..nn).filter(|&v| !is_boundary[v]).collect();
        let boundary: Vec<usize> = (0..nn).filter(|&v| is_boundary[v]).collect();
        let free_groups = &groups[groups.len().min(1)..];
        let dim = free_groups.len();
        let mut streams = Mat::<f64>::zeros(nn, dim);
        for (k, g) in free_groups.iter().enumerate() {
            for &v in g {
                streams[(v, k)] = 1.0;
            }
        }
        if dim > 0 && !interior.is_empty() {
            let mut bpos = vec![usize::MAX; nn];
            for (k, &v) in boundary.iter().enumerate() {
                bpos[v] = k;
            }
            let g = Mat::from_fn(boundary.len(), dim, |r, c| streams[(boundary[r], c)]);
            let k_ib = stiff.submatrix(&interior, &boundary);
            let rhs = k_ib.mul_dense(&g) * faer::Scale(-1.0);
            let k_ii = stiff.submatrix(&interior, &interior);
            let x = SpdFactor::new(&k_ii)?.solve(&rhs);
            for (r, &v) in interior.iter().enumerate() {
                for c in 0..dim {
                    streams[(v, c)] = x[(r, c)];
                }
            }
        }
        let velocities = curl.mul_dense(&streams);
        Ok(HarmonicStreamSpace { streams, velocities, interior_nodes: interior })
    }

    /// Smallest eigenpairs of `a_{omega*}(v, w) = lambda a_{omega}(v, w)` on
    /// the harmonic space. `n_loc = None` keeps every mode with a finite
    /// eigenvalue; the others vanish on `omega`.
    pub fn solve_eigen(&self, space: &HarmonicStreamSpace, n_loc: Option<usize>) -> Result<LocalVelocityBasis> {
        let dim = space.dim();
        if n_loc.is_some_and(|n| n > dim) {
            return Err(Error::Eigen(format!(
                "subdomain {}: n_loc = {} exceeds the harmonic space dimension {dim}",
                self.index,
                n_loc.unwrap_or(0)
            )));
        }
        let omega_mass = assemble_mass_on(self.mesh, self.coeff, &self.star_dofs, &self.decomp.omega[self.index])?;
        let vb = &space.velocities;
        let big = vb.transpose() * self.star_mass.mul_dense(vb);
        let small = vb.transpose() * omega_mass.mul_dense(vb);
        let count = match n_loc {
            Some(n) => n,
            None => {
                let probe = EigenProblem { stiffness_big: big.clone(), stiffness_small: small.clone(), count: 0 };
                solve_generalized_eig(&probe)?.eigenvalues.iter().filter(|l| l.is_finite()).count()
            }
        };
        let pairs = solve_generalized_eig(&EigenProblem { stiffness_big: big, stiffness_small: small, count })?;
        let modes_mat = vb * &pairs.vectors;
        let modes_star: Vec<Vec<f64>> =
            (0..count).map(|k| (0..modes_mat.nrows()).map(|r| modes_mat[(r, k)]).collect()).collect();
        let modes = modes_star.iter().map(|m| self.star_dofs.transfer_edges(m, &self.omega_dofs)).collect();
        Ok(LocalVelocityBasis { modes, modes_star, eigenvalues: pairs.eigenvalues })
    }

    fn omega0_system(&self) -> Result<&Omega0System> {
        if let Some(s) = self.omega0_system.get() {
            return Ok(s);
        }
        let dofs = &self.omega0_dofs;
        let mass = assemble_mass(self.mesh, self.coeff, dofs)?;
        let div = assemble_div(self.mesh, dofs);
        let boundary: Vec<usize> = self.decomp.omega0[self.index]
            .boundary_edges(self.mesh)
            .into_iter()
            .map(|e| dofs.local_edge(e).expect("boundary edge of the block"))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let system = SaddleSystem::factor(&mass, &div, &boundary, PressureGauge::MeanZeroLagrange, None)?;
        let _ = self.omega0_system.set(Omega0System { mass, div, boundary, system });
        Ok(self.omega0_system.get().expect("just set"))
    }

    /// Pressures recovered from the normal traces of the modes on the
    /// coarse block.
    pub fn reconstruct_pressures(&self, basis: &LocalVelocityBasis) -> Result<LocalPressureBasis> {
        let sys = self.omega0_system()?;
        let ne = self.omega0_dofs.num_edges();
        let nc = self.omega0_dofs.num_cells();
        let mut pressures = Vec::with_capacity(basis.n_loc());
        let mut mismatch = 0.0f64;
        for mode in &basis.modes {
            let on_block = self.omega_dofs.transfer_edges(mode, &self.omega0_dofs);
            let prescribed: Vec<f64> = sys.boundary.iter().map(|&e| on_block[e]).collect();
            let sol = sys.system.solve(&vec![0.0; ne], &vec![0.0; nc], &prescribed, self.tol)?;
            let scale = sys.mass.form(&on_block, &on_block).sqrt().max(f64::MIN_POSITIVE);
            let diff: Vec<f64> = sol.u.iter().zip(&on_block).map(|(a, b)| a - b).collect();
            mismatch = mismatch.max(sys.mass.form(&diff, &diff).sqrt() / scale);
            pressures.push(sol.p);
        }
        Ok(LocalPressureBasis { pressures, max_velocity_mismatch: mismatch })
    }

    /// Zero-flux fields on the coarse block whose divergence is each
    /// pressure.
    pub fn build_enrichment(&self, pressures: &LocalPressureBasis) -> Result<LocalEnrichment> {
        let sys = self.omega0_system()?;
        let area = self.mesh.cell_area();
        let ne = self.omega0_dofs.num_edges();
        let zeros = vec![0.0; sys.boundary.len()];
        let mut fields = Vec::with_capacity(pressures.pressures.len());
        let mut ratios = Vec::with_capacity(pressures.pressures.len());
        for p in &pressures.pressures {
            let p_norm = (p.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            if mean.abs() > 1e-10 * (p_norm / (p.len() as f64 * area).sqrt()).max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidInput(format!(
                    "enrichment needs mean-zero pressure, mean is {mean:e}"
                )));
            }
            let rhs_p: Vec<f64> = p.iter().map(|v| v * area).collect();
            let sol = sys.system.solve(&vec![0.0; ne], &rhs_p, &zeros, self.tol)?;
            let div = sys.div.mul_vec(&sol.u);
            let div_sq: f64 = div.iter().map(|d| d * d / area).sum();
            let energy = (sys.mass.form(&sol.u, &sol.u) + div_sq).sqrt();
            ratios.push(if p_norm > 0.0 { energy / p_norm } else { 0.0 });
            fields.push(sol.u);
        }
        Ok(LocalEnrichment { fields, stability_ratios: ratios })
    }

    /// The whole per-subdomain pipeline.
    pub fn build(&self, f: &[f64], n_loc: Option<usize>, bc: ParticularBc) -> Result<LocalBasis> {
        let particular = self.solve_particular(f, bc)?;
        let space = self.harmonic_space()?;
        let velocity = self.solve_eigen(&space, n_loc)?;
        let pressures = self.reconstruct_pressures(&velocity)?;
        let enrichment = self.build_enrichment(&pressures)?;
        Ok(LocalBasis {
            index: self.index,
            omega_dofs: self.omega_dofs.clone(),
            omega0_dofs: self.omega0_dofs.clone(),
            particular,
            velocity,
            pressures,
            enrichment,
        })
    }
}

fn subtract_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

pub fn solve_particular(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    f: &[f64],
    decomp: &Decomposition,
    i: usize,
    bc: ParticularBc,
    tol: f64,
) -> Result<LocalParticular> {
    LocalProblem::new(mesh, coeff, decomp, i, tol)?.solve_particular(f, bc)
}

pub fn solve_local_eigen(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    decomp: &Decomposition,
    i: usize,
    n_loc: usize,
    tol: f64,
) -> Result<LocalVelocityBasis> {
    let lp = LocalProblem::new(mesh, coeff, decomp, i, tol)?;
    lp.solve_eigen(&lp.harmonic_space()?, Some(n_loc))
}

/// Builds every subdomain's basis in parallel, ordered by subdomain index.
pub fn build_local_bases(
    mesh: &FineMesh,
    coeff: &CoefficientField,
    f: &[f64],
    decomp: &Decomposition,
    n_loc: Option<usize>,
    bc: ParticularBc,
    tol: f64,
) -> Result<Vec<LocalBasis>> {
    (0..decomp.len())
        .into_par_iter()
        .map(|i| LocalProblem::new(mesh, coeff, decomp, i, tol)?.build(f, n_loc, bc))
        .collect()
}
