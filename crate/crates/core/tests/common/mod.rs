//! Shared checks for the integration tests.

#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use msgfem::decomposition::build_decomposition;
use msgfem::fem::{assemble_augmented, assemble_div, assemble_mass};
use msgfem::local_basis::{build_local_bases, ParticularBc};
use msgfem::mesh::build_cartesian_mesh;
use msgfem::saddle::{solve_saddle, SaddleProblem};
use msgfem::{CellRegion, CoefficientField, FineMesh, PressureGauge, RegionDofs, SourceField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_coeff(mesh: &FineMesh, contrast: f64, seed: u64) -> CoefficientField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.num_cells()).map(|_| contrast.powf(rng.random::<f64>())).collect();
    CoefficientField::new(mesh, values).unwrap()
}

/// A small instance of the local pipeline.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub ell: usize,
    pub contrast: f64,
    pub seed: u64,
}

/// Local-basis invariants over every finite mode: divergence-free modes, ascending eigenvalues not
/// below one, partition of unity, mean-zero pressures, enrichment divergence.
pub fn check_local_invariants(inst: Instance) -> Result<(), String> {
    let mesh = build_cartesian_mesh(inst.n, inst.n).map_err(|e| e.to_string())?;
    let coeff = random_coeff(&mesh, inst.contrast, inst.seed);
    let f = SourceField::Example1.cell_values(&mesh).unwrap();
    let decomp = build_decomposition(&mesh, inst.m, inst.ell).map_err(|e| e.to_string())?;

    for v in 0..mesh.num_nodes() {
        let s: f64 = decomp.pou.iter().map(|chi| chi[v]).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(format!("partition of unity sums to {s} at node {v}"));
        }
    }

    let locals = build_local_bases(&mesh, &coeff, &f, &decomp, None, ParticularBc::DirichletPressure, 1e-10)
        .map_err(|e| e.to_string())?;
    let area = mesh.cell_area();
    for l in &locals {
        let ev = &l.velocity.eigenvalues;
        for w in ev.windows(2) {
            if w[1] < w[0] {
                return Err(format!("subdomain {}: eigenvalues not ascending", l.index));
            }
        }
        if let Some(&first) = ev.first() {
            if first < 1.0 - 1e-10 {
                return Err(format!("subdomain {}: eigenvalue {first} below one", l.index));
            }
        }

        let div = assemble_div(&mesh, &l.omega_dofs);
        for (k, mode) in l.velocity.modes.iter().enumerate() {
            let scale = mode.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            let d = div.mul_vec(mode).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if d > 1e-10 * scale {
                return Err(format!("subdomain {}: mode {k} has divergence {d:e}", l.index));
            }
        }

        let div0 = assemble_div(&mesh, &l.omega0_dofs);
        for (k, (p, u)) in l.pressures.pressures.iter().zip(&l.enrichment.fields).enumerate() {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let mean: f64 = p.iter().sum::<f64>();
            if mean.abs() > 1e-9 * norm {
                return Err(format!("subdomain {}: pressure {k} has mean {mean:e}", l.index));
            }
            let du = div0.mul_vec(u);
            let gap = du.iter().zip(p).map(|(d, q)| (d / area - q).abs()).fold(0.0, f64::max);
            if gap > 1e-9 * norm {
                return Err(format!("subdomain {}: enrichment {k} divergence off by {gap:e}", l.index));
            }
        }
    }
    Ok(())
}

/// Saddle solve on an `n x n` grid against a dense bordered system with the
/// mean multiplier kept as an unknown. Returns the largest relative gap.
pub fn saddle_vs_dense(n: usize, gamma: f64, seed: u64) -> f64 {
    let mesh = build_cartesian_mesh(n, n).unwrap();
    let coeff = random_coeff(&mesh, 100.0, seed);
    let dofs = RegionDofs::new(&mesh, &CellRegion::whole(&mesh));
    let mass = assemble_mass(&mesh, &coeff, &dofs).unwrap();
    let b = assemble_div(&mesh, &dofs);
    let a = assemble_augmented(&mesh, &mass, &b, gamma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let ne = mesh.num_edges();
    let nc = mesh.num_cells();
    let rhs_u: Vec<f64> = (0..ne).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rhs_p: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = rhs_p.iter().sum::<f64>() / nc as f64;
    rhs_p.iter_mut().for_each(|v| *v -= mean);
    let constrained: Vec<(usize, f64)> =
        (0..ne).filter(|&e| mesh.is_boundary_edge(e)).map(|e| (e, 0.0)).collect();
    let sol = solve_saddle(
        &SaddleProblem {
            a: &a,
            b: &b,
            rhs_u: rhs_u.clone(),
            rhs_p: rhs_p.clone(),
            constrained,
            gauge: PressureGauge::MeanZeroLagrange,
            weights: None,
        },
        1e-10,
    )
    .unwrap();

    let free: Vec<usize> = (0..ne).filter(|&e| !mesh.is_boundary_edge(e)).collect();
    let nf = free.len();
    let dim = nf + nc + 1;
    let ad = a.to_dense();
    let bd = b.to_dense();
    let mut k = Mat::<f64>::zeros(dim, dim);
    let mut rhs = Mat::<f64>::zeros(dim, 1);
    for (i, &ei) in free.iter().enumerate() {
        for (j, &ej) in free.iter().enumerate() {
            k[(i, j)] = ad[(ei, ej)];
        }
        for c in 0..nc {
            k[(i, nf + c)] = bd[(c, ei)];
            k[(nf + c, i)] = bd[(c, ei)];
        }
        rhs[(i, 0)] = rhs_u[ei];
    }
    for c in 0..nc {
        k[(nf + c, nf + nc)] = 1.0;
        k[(nf + nc, nf + c)] = 1.0;
        rhs[(nf + c, 0)] = rhs_p[c];
    }
    let x = k.full_piv_lu().solve(&rhs);

    let mut u_dense = vec![0.0; ne];
    for (i, &e) in free.iter().enumerate() {
        u_dense[e] = x[(i, 0)];
    }
    let p_dense: Vec<f64> = (0..nc).map(|c| x[(nf + c, 0)]).collect();
    let rel = |a: &[f64], b: &[f64]| {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let s = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
        d / s
    };
    rel(&sol.u, &u_dense).max(rel(&sol.p, &p_dense))
}
