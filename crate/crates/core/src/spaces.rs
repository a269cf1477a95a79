//! Discrete P1 spaces for the coupled bulk-fracture problems. Each space
//! kind differs only in how degrees of freedom on the interface are
//! identified or constrained.

use crate::mesh::{FracturedMesh, Subdomain};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// displacement with fracture-boundary traces identified with the bulk
    VFull,
    /// closure variant; same identification, fracture fields only need
    /// normal-derivative regularity
    VSharp,
    /// bulk and fracture displacements independent, fracture traces pinned
    VGt1,
    /// bulk-only displacement with a jump across gamma
    V1,
    /// pressure with fracture-boundary traces identified with the bulk
    PhiFull,
    PhiSharp,
    /// all gamma and fracture pressure dofs collapse to one scalar
    PhiLtM1,
    /// bulk traces coupled to a 1D field on gamma
    PhiM1,
    /// continuous bulk pressure across gamma, no fracture unknowns
    PhiOpen,
    /// bulk sides independent with a jump term on gamma
    Phi1,
    /// bulk sides fully decoupled
    PhiGt1,
    /// standalone 1D P1 space on gamma
    GammaP1,
}

impl SpaceKind {
    pub fn ncomp(&self) -> usize {
        match self {
            SpaceKind::VFull | SpaceKind::VSharp | SpaceKind::VGt1 | SpaceKind::V1 => 2,
            _ => 1,
        }
    }

    pub fn is_vector(&self) -> bool {
        self.ncomp() == 2
    }
}

/// Degree-of-freedom map of one discrete space. Vertices sharing a dof
/// (interface identifications) map to the same base index; components of a
/// vector dof are contiguous.
#[derive(Debug, Clone)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub ncomp: usize,
    pub n_dofs: usize,
    /// base dof per mesh vertex, None when the vertex carries no dof
    pub vertex_dof: Vec<Option<usize>>,
    /// per-dof Dirichlet mask
    pub dirichlet: Vec<bool>,
}

impl SpaceDescriptor {
    #[inline]
    pub fn dof(&self, vertex: usize, comp: usize) -> Option<usize> {
        self.vertex_dof[vertex].map(|b| b + comp)
    }

    pub fn n_free(&self) -> usize {
        self.dirichlet.iter().filter(|d| !*d).count()
    }

    /// Nodal values per vertex from a coefficient vector (merged vertices
    /// read the shared dof). Vertices outside the support yield 0.
    pub fn vertex_values(&self, coeffs: &[f64], comp: usize) -> Vec<f64> {
        self.vertex_dof
            .iter()
            .map(|d| d.map(|b| coeffs[b + comp]).unwrap_or(0.0))
            .collect()
    }
}

pub fn build_space(mesh: &FracturedMesh, kind: SpaceKind) -> Result<SpaceDescriptor> {
    let n_v = mesh.n_vertices();
    let ncomp = kind.ncomp();

    // representative vertex per identification group
    let mut rep: Vec<usize> = (0..n_v).collect();
    // support mask
    let mut support = vec![true; n_v];
    // extra per-vertex Dirichlet on top of the mesh masks
    let mut extra_dirichlet = vec![false; n_v];

    let identify_pairings = |rep: &mut Vec<usize>| {
        for &(f, b) in mesh.pairing_plus.iter().chain(mesh.pairing_minus.iter()) {
            // the fracture edge vertex has the smaller id by construction
            let r = f.min(b);
            rep[f.max(b)] = r;
            rep[f.min(b)] = r;
        }
    };

    match kind {
        SpaceKind::VFull | SpaceKind::VSharp | SpaceKind::PhiFull | SpaceKind::PhiSharp => {
            identify_pairings(&mut rep);
        }
        SpaceKind::VGt1 => {
            for &(f, _) in mesh.pairing_plus.iter().chain(mesh.pairing_minus.iter()) {
                extra_dirichlet[f] = true;
            }
        }
        SpaceKind::V1 | SpaceKind::Phi1 | SpaceKind::PhiGt1 => {
            for v in 0..n_v {
                if mesh.vertex_region[v] == Subdomain::Fracture {
                    support[v] = false;
                }
            }
        }
        SpaceKind::PhiLtM1 => {
            let r = mesh.gamma_minus_vertex(0).min(mesh.gamma_plus_vertex(0));
            for i in 0..mesh.n_stations() {
                rep[mesh.gamma_plus_vertex(i)] = r;
                rep[mesh.gamma_minus_vertex(i)] = r;
            }
            for v in 0..n_v {
                if mesh.vertex_region[v] == Subdomain::Fracture {
                    rep[v] = r;
                }
            }
            if mesh.geometry.fracture_has_dirichlet() {
                // W = {0}
                extra_dirichlet[r] = true;
            }
        }
        SpaceKind::PhiM1 | SpaceKind::PhiOpen => {
            for i in 0..mesh.n_stations() {
                let r = mesh.gamma_minus_vertex(i).min(mesh.gamma_plus_vertex(i));
                rep[mesh.gamma_plus_vertex(i)] = r;
                rep[mesh.gamma_minus_vertex(i)] = r;
                for &fv in &mesh.columns[i].vertices {
                    rep[fv] = r;
                }
            }
            if kind == SpaceKind::PhiM1 {
                if mesh.gamma_dirichlet.0 {
                    extra_dirichlet[rep[mesh.gamma_plus_vertex(0)]] = true;
                }
                if mesh.gamma_dirichlet.1 {
                    extra_dirichlet[rep[mesh.gamma_plus_vertex(mesh.ny)]] = true;
                }
            }
        }
        SpaceKind::GammaP1 => {
            for v in 0..n_v {
                support[v] = false;
            }
            for i in 0..mesh.n_stations() {
                support[mesh.gamma_plus_vertex(i)] = true;
            }
            if mesh.gamma_dirichlet.0 {
                extra_dirichlet[mesh.gamma_plus_vertex(0)] = true;
            }
            if mesh.gamma_dirichlet.1 {
                extra_dirichlet[mesh.gamma_plus_vertex(mesh.ny)] = true;
            }
        }
    }

    // a merged group is supported iff its representative is
    let group_support: Vec<bool> = (0..n_v).map(|v| support[rep[v]]).collect();

    // number the representatives in vertex order
    let mut vertex_dof = vec![None; n_v];
    let mut next = 0usize;
    for v in 0..n_v {
        if rep[v] == v && group_support[v] {
            vertex_dof[v] = Some(next);
            next += ncomp;
        }
    }
    for v in 0..n_v {
        if rep[v] != v && group_support[v] {
            vertex_dof[v] = vertex_dof[rep[v]];
        }
    }
    let n_dofs = next;

    // Dirichlet masks: flow spaces use the flow-Dirichlet tags, displacement
    // spaces pin every external boundary vertex. A merged dof is constrained
    // if any member vertex is. The closure spaces only control the normal
    // derivative inside the strip, where the tangential boundary condition
    // is not closable: their fracture vertices keep no boundary data of
    // their own (they may still be pinned through a merged bulk vertex).
    let closure_fracture = matches!(
        kind,
        SpaceKind::VSharp | SpaceKind::PhiSharp | SpaceKind::VGt1
    );
    let mut dirichlet = vec![false; n_dofs];
    let vector = kind.is_vector();
    for v in 0..n_v {
        let Some(base) = vertex_dof[v] else { continue };
        let own_mask = if closure_fracture && mesh.vertex_region[v] == Subdomain::Fracture {
            false
        } else if vector {
            mesh.external_vertices[v]
        } else {
            mesh.flow_dirichlet_vertices[v]
        };
        if extra_dirichlet[v] || own_mask {
            for c in 0..ncomp {
                dirichlet[base + c] = true;
            }
        }
    }

    Ok(SpaceDescriptor {
        kind,
        ncomp,
        n_dofs,
        vertex_dof,
        dirichlet,
    })
}
