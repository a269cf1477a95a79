//! Assembly of the bilinear and linear forms: triangle kernels for the bulk
//! and the eps-scaled fracture terms, column kernels for the normal-direction
//! fracture operators of the limit models, and vertex-rule interface terms.
//!
//! Inside the rescaled strip the normal direction is the embedded x axis, so
//! the eps-scaled gradient simply divides the x component by eps. Triangle
//! quadrature is the 3-point edge-midpoint rule (order 2, exact for P1xP1
//! with piecewise-constant coefficients); interface and column integrals use
//! the mesh-aligned vertex rule in the tangential coordinate, which makes
//! the column reductions of the limit models exact.

use crate::effective::EffectiveParams;
use crate::exponents::ScalingExponents;
use crate::linalg::SkylineMatrix;
use crate::materials::MaterialFields;
use crate::mesh::{FracturedMesh, Subdomain};
use crate::spaces::SpaceDescriptor;
use crate::{Error, Result};

/// Sparse operator in triplet form together with a right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n_rows: usize,
    pub n_cols: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        SparseSystem {
            n_rows,
            n_cols,
            triplets: Vec::new(),
            rhs: vec![0.0; n_rows],
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    /// Dense copy, for small oracle checks only.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows * self.n_cols];
        for &(i, j, v) in &self.triplets {
            d[i * self.n_cols + j] += v;
        }
        d
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.to_dense();
        let n = self.n_rows;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                m = m.max((d[i * n + j] - d[j * n + i]).abs());
            }
        }
        m
    }

    pub fn to_skyline(&self) -> SkylineMatrix {
        assert_eq!(self.n_rows, self.n_cols);
        SkylineMatrix::from_triplets(self.n_rows, &self.triplets)
    }
}

/// Named forms of the transformed problem and the limit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// elasticity with eps-scaled strain and fracture prefactor eps^(nu_C+1)
    AHat,
    /// Biot coupling with the matrix-exponent fracture prefactor
    BHat,
    /// storage mass with fracture prefactor eps^(nu_omega+1)
    CHat,
    /// Darcy stiffness with eps-scaled gradients and eps^(nu_K+1)
    DHat,
    /// mechanics load (sources plus gravity coupling)
    LHat,
    /// bulk-only restrictions of the above (limit-model building blocks)
    Ab0,
    Bb0,
    Cb0,
    Db0,
    Lb0,
    /// per-column <C_f^N dN u, dN v> over the strip
    FractureNormalStiffness,
    /// per-column <K_f^N dN p, dN q> over the strip
    FractureNormalConductivity,
    /// <a^-1 K_gamma^N [[p]],[[q]]> on gamma, vertex rule
    InterfaceMassJump,
    /// <a K_gamma grad p, grad q> on gamma, 1D P1 stiffness
    GammaStiffness,
    /// <a A_N(omega_f^eff) p, q> on gamma, vertex rule
    GammaMass,
    /// <phi alpha_f^eff, dN v> column coupling (rows: vector test space)
    CouplingAlphaEff,
}

#[derive(Debug, Clone)]
pub struct FormSpec {
    pub kind: FormKind,
    pub epsilon: Option<f64>,
    pub exponents: Option<ScalingExponents>,
    /// evaluation time for the load forms
    pub time: f64,
}

impl FormSpec {
    pub fn full(kind: FormKind, epsilon: f64, exponents: ScalingExponents) -> Self {
        FormSpec {
            kind,
            epsilon: Some(epsilon),
            exponents: Some(exponents),
            time: 0.0,
        }
    }
    pub fn limit(kind: FormKind) -> Self {
        FormSpec {
            kind,
            epsilon: None,
            exponents: None,
            time: 0.0,
        }
    }
    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }
}

// ---------------------------------------------------------------------------
// triangle geometry helpers

pub(crate) struct TriGeom {
    pub area: f64,
    /// P1 basis gradients (embedded = logical up to a shift)
    pub grad: [[f64; 2]; 3],
    /// logical coordinates of the edge-midpoint quadrature points
    pub qpoints: [[f64; 2]; 3],
    /// logical centroid
    pub centroid: [f64; 2],
    pub region: Subdomain,
    pub verts: [usize; 3],
}

pub(crate) fn tri_geom(mesh: &FracturedMesh, t: usize) -> TriGeom {
    let verts = mesh.triangles[t];
    let p: Vec<[f64; 2]> = verts.iter().map(|&v| mesh.logical_coords(v).1).collect();
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut grad = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        grad[i] = [
            (p[j][1] - p[k][1]) / (2.0 * area),
            (p[k][0] - p[j][0]) / (2.0 * area),
        ];
    }
    let qpoints = [
        [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
        [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
        [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
    ];
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    TriGeom {
        area,
        grad,
        qpoints,
        centroid,
        region: mesh.triangle_region[t],
        verts,
    }
}

/// Basis value of vertex i at quadrature point q (edge-midpoint rule).
#[inline]
pub(crate) fn phi_at_q(i: usize, q: usize) -> f64 {
    // qpoint 0 = mid(v0,v1), 1 = mid(v1,v2), 2 = mid(v2,v0)
    const TABLE: [[f64; 3]; 3] = [[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]];
    TABLE[i][q]
}

/// eps-scaled gradient: x (normal) component divided by eps in the fracture.
#[inline]
fn scale_grad(g: [f64; 2], region: Subdomain, eps: Option<f64>) -> [f64; 2] {
    match (region, eps) {
        (Subdomain::Fracture, Some(e)) => [g[0] / e, g[1]],
        _ => g,
    }
}

fn sym_outer(e_comp: usize, g: [f64; 2]) -> [[f64; 2]; 2] {
    // sym(e_a (x) g)
    let mut m = [[0.0; 2]; 2];
    for l in 0..2 {
        m[e_comp][l] += 0.5 * g[l];
        m[l][e_comp] += 0.5 * g[l];
    }
    m
}

/// Fracture Biot prefactor: the matrix exponent eps^(nu_alpha) acts as
/// eps^(nu_par) on the tangential block and eps^(nu_perp) on the normal one.
fn scaled_fracture_biot(alpha: [[f64; 2]; 2], eps: f64, exp: &ScalingExponents) -> [[f64; 2]; 2] {
    let sn = eps.powf(exp.nu_alpha_perp.to_f64() + 1.0);
    let st = eps.powf(exp.nu_alpha_par.to_f64() + 1.0);
    // block-diagonal: entry (0,0) is the normal block, (1,1) the tangential
    [[sn * alpha[0][0], 0.0], [0.0, st * alpha[1][1]]]
}

pub(crate) enum Prefactor {
    /// bulk triangles only
    BulkOnly,
    /// bulk unscaled, fracture scaled by eps powers
    Full {
        eps: f64,
        exponents: ScalingExponents,
    },
}

impl Prefactor {
    fn skip(&self, region: Subdomain) -> bool {
        matches!(self, Prefactor::BulkOnly) && region == Subdomain::Fracture
    }
    fn eps(&self) -> Option<f64> {
        match self {
            Prefactor::BulkOnly => None,
            Prefactor::Full { eps, .. } => Some(*eps),
        }
    }
}

// ---------------------------------------------------------------------------
// triangle kernels (shared by the full solver and the public assemble)

pub(crate) fn add_elasticity(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if pre.skip(g.region) {
            continue;
        }
        let scale = match pre {
            Prefactor::BulkOnly => 1.0,
            Prefactor::Full { eps, exponents } => {
                if g.region == Subdomain::Fracture {
                    eps.powf(exponents.nu_c.to_f64() + 1.0)
                } else {
                    1.0
                }
            }
        };
        let c4 = mat.elasticity(g.region).eval(g.centroid);
        let grads: Vec<[f64; 2]> = g
            .grad
            .iter()
            .map(|&gr| scale_grad(gr, g.region, pre.eps()))
            .collect();
        for i in 0..3 {
            let Some(bi) = space.vertex_dof[g.verts[i]] else {
                continue;
            };
            for a in 0..2 {
                let e_test = sym_outer(a, grads[i]);
                for j in 0..3 {
                    let Some(bj) = space.vertex_dof[g.verts[j]] else {
                        continue;
                    };
                    for b in 0..2 {
                        let e_trial = sym_outer(b, grads[j]);
                        let v = scale * g.area * c4.contract(e_trial, e_test);
                        if v != 0.0 {
                            out.push((bi + a, bj + b, v));
                        }
                    }
                }
            }
        }
    }
}

/// Biot coupling B(p, v) = <p alpha, grad v>; rows are displacement dofs,
/// columns pressure dofs.
pub(crate) fn add_biot_coupling(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    p_space: &SpaceDescriptor,
    u_space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if pre.skip(g.region) {
            continue;
        }
        let alpha = mat.biot(g.region).eval(g.centroid);
        let alpha = match pre {
            Prefactor::Full { eps, exponents } if g.region == Subdomain::Fracture => {
                scaled_fracture_biot(alpha, *eps, exponents)
            }
            _ => alpha,
        };
        for i in 0..3 {
            let Some(bi) = u_space.vertex_dof[g.verts[i]] else {
                continue;
            };
            let gi = scale_grad(g.grad[i], g.region, pre.eps());
            let ag = [
                alpha[0][0] * gi[0] + alpha[0][1] * gi[1],
                alpha[1][0] * gi[0] + alpha[1][1] * gi[1],
            ];
            for j in 0..3 {
                let Some(bj) = p_space.vertex_dof[g.verts[j]] else {
                    continue;
                };
                for a in 0..2 {
                    let v = ag[a] * g.area / 3.0;
                    if v != 0.0 {
                        out.push((bi + a, bj, v));
                    }
                }
            }
        }
    }
}

pub(crate) fn add_storage_mass(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    p_space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if pre.skip(g.region) {
            continue;
        }
        let scale = match pre {
            Prefactor::BulkOnly => 1.0,
            Prefactor::Full { eps, exponents } => {
                if g.region == Subdomain::Fracture {
                    eps.powf(exponents.nu_omega.to_f64() + 1.0)
                } else {
                    1.0
                }
            }
        };
        for q in 0..3 {
            let w = mat.storage(g.region).eval(g.qpoints[q], 0.0) * g.area / 3.0 * scale;
            for i in 0..3 {
                let Some(bi) = p_space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    let Some(bj) = p_space.vertex_dof[g.verts[j]] else {
                        continue;
                    };
                    let pj = phi_at_q(j, q);
                    if pj != 0.0 {
                        out.push((bi, bj, w * pi * pj));
                    }
                }
            }
        }
    }
}

pub(crate) fn add_darcy_stiffness(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    p_space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if pre.skip(g.region) {
            continue;
        }
        let scale = match pre {
            Prefactor::BulkOnly => 1.0,
            Prefactor::Full { eps, exponents } => {
                if g.region == Subdomain::Fracture {
                    eps.powf(exponents.nu_k.to_f64() + 1.0)
                } else {
                    1.0
                }
            }
        };
        let k = mat.conductivity(g.region).eval(g.centroid);
        let grads: Vec<[f64; 2]> = g
            .grad
            .iter()
            .map(|&gr| scale_grad(gr, g.region, pre.eps()))
            .collect();
        for i in 0..3 {
            let Some(bi) = p_space.vertex_dof[g.verts[i]] else {
                continue;
            };
            for j in 0..3 {
                let Some(bj) = p_space.vertex_dof[g.verts[j]] else {
                    continue;
                };
                let kg = [
                    k[0][0] * grads[j][0] + k[0][1] * grads[j][1],
                    k[1][0] * grads[j][0] + k[1][1] * grads[j][1],
                ];
                let v = scale * g.area * (kg[0] * grads[i][0] + kg[1] * grads[i][1]);
                out.push((bi, bj, v));
            }
        }
    }
}

/// Mechanics load <[eps^(nu_f+1)] f, v> + <[eps^(nu_alpha+1)] G alpha, grad^eps v>.
pub(crate) fn add_mech_load(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    u_space: &SpaceDescriptor,
    t: f64,
) {
    let tf = mat.mech_source_time.eval(t);
    for tr in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, tr);
        if pre.skip(g.region) {
            continue;
        }
        let (f_scale, eps_for_g) = match pre {
            Prefactor::BulkOnly => (1.0, 0.0),
            Prefactor::Full { eps, exponents } => (
                if g.region == Subdomain::Fracture {
                    eps.powf(exponents.nu_f.to_f64() + 1.0)
                } else {
                    1.0
                },
                *eps,
            ),
        };
        // body force
        for q in 0..3 {
            let f = mat.mech_source(g.region).eval(g.qpoints[q], t);
            for i in 0..3 {
                let Some(bi) = u_space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi == 0.0 {
                    continue;
                }
                for a in 0..2 {
                    rhs[bi + a] += f_scale * tf * g.area / 3.0 * f[a] * pi;
                }
            }
        }
        // gravity coupling
        if mat.gravity != [0.0, 0.0] {
            let alpha = mat.biot(g.region).eval(g.centroid);
            let (alpha, eps_grad) = match pre {
                Prefactor::Full { eps, exponents } if g.region == Subdomain::Fracture => {
                    (scaled_fracture_biot(alpha, *eps, exponents), Some(*eps))
                }
                _ => (alpha, None),
            };
            let mut gbar = 0.0;
            for q in 0..3 {
                gbar += mat.gravity_potential(g.region, g.qpoints[q], eps_for_g) / 3.0;
            }
            for i in 0..3 {
                let Some(bi) = u_space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let gi = scale_grad(g.grad[i], g.region, eps_grad);
                for a in 0..2 {
                    let v = alpha[a][0] * gi[0] + alpha[a][1] * gi[1];
                    rhs[bi + a] += g.area * gbar * v;
                }
            }
        }
    }
}

/// Flow load <[eps^(nu_q+1)] q, phi>. `frac_extra` multiplies the fracture
/// source on top of the admissible scaling (used for the inadmissible-source
/// counterexample).
pub(crate) fn add_flow_load(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    mat: &MaterialFields,
    pre: &Prefactor,
    p_space: &SpaceDescriptor,
    t: f64,
    frac_extra: f64,
) {
    let tf = mat.flow_source_time.eval(t);
    for tr in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, tr);
        if pre.skip(g.region) {
            continue;
        }
        let scale = match pre {
            Prefactor::BulkOnly => 1.0,
            Prefactor::Full { eps, exponents } => {
                if g.region == Subdomain::Fracture {
                    frac_extra * eps.powf(exponents.nu_q.to_f64() + 1.0)
                } else {
                    1.0
                }
            }
        };
        for q in 0..3 {
            let s = mat.flow_source(g.region).eval(g.qpoints[q], t) * tf;
            for i in 0..3 {
                let Some(bi) = p_space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi != 0.0 {
                    rhs[bi] += scale * g.area / 3.0 * s * pi;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// column kernels (normal-direction operators of the limit models)

/// Per-column 1D stiffness <M dN u, dN v> with a 2x2 coefficient sampled at
/// segment midpoints; tangential integration by the station vertex rule.
pub(crate) fn add_column_stiffness_vec(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64, f64) -> [[f64; 2]; 2],
    space: &SpaceDescriptor,
) {
    for col in &mesh.columns {
        let w = mesh.station_weight(col.station);
        for j in 0..col.seg_len.len() {
            let l = col.seg_len[j];
            let (va, vb) = (col.vertices[j], col.vertices[j + 1]);
            let sm = {
                let (_, pa) = mesh.logical_coords(va);
                let (_, pb) = mesh.logical_coords(vb);
                (pa[0] + pb[0]) / 2.0
            };
            let m = coeff(sm, col.y);
            let (Some(ba), Some(bb)) = (space.vertex_dof[va], space.vertex_dof[vb]) else {
                continue;
            };
            for a in 0..2 {
                for b in 0..2 {
                    let k = w * m[a][b] / l;
                    out.push((ba + a, ba + b, k));
                    out.push((bb + a, bb + b, k));
                    out.push((ba + a, bb + b, -k));
                    out.push((bb + a, ba + b, -k));
                }
            }
        }
    }
}

pub(crate) fn add_column_stiffness_scalar(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64, f64) -> f64,
    space: &SpaceDescriptor,
) {
    for col in &mesh.columns {
        let w = mesh.station_weight(col.station);
        for j in 0..col.seg_len.len() {
            let l = col.seg_len[j];
            let (va, vb) = (col.vertices[j], col.vertices[j + 1]);
            let sm = {
                let (_, pa) = mesh.logical_coords(va);
                let (_, pb) = mesh.logical_coords(vb);
                (pa[0] + pb[0]) / 2.0
            };
            let k = w * coeff(sm, col.y) / l;
            let (Some(ba), Some(bb)) = (space.vertex_dof[va], space.vertex_dof[vb]) else {
                continue;
            };
            out.push((ba, ba, k));
            out.push((bb, bb, k));
            out.push((ba, bb, -k));
            out.push((bb, ba, -k));
        }
    }
}

/// Column coupling <phi alpha, dN v>: rows are vector dofs of `u_space`,
/// columns scalar dofs of `p_space`.
pub(crate) fn add_column_coupling(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    alpha: &dyn Fn(f64, f64) -> [f64; 2],
    p_space: &SpaceDescriptor,
    u_space: &SpaceDescriptor,
) {
    for col in &mesh.columns {
        let w = mesh.station_weight(col.station);
        for j in 0..col.seg_len.len() {
            let (va, vb) = (col.vertices[j], col.vertices[j + 1]);
            let sm = {
                let (_, pa) = mesh.logical_coords(va);
                let (_, pb) = mesh.logical_coords(vb);
                (pa[0] + pb[0]) / 2.0
            };
            let al = alpha(sm, col.y);
            let (Some(ua), Some(ub)) = (u_space.vertex_dof[va], u_space.vertex_dof[vb]) else {
                continue;
            };
            for (pk, pv) in [(va, 0.5), (vb, 0.5)] {
                let Some(pd) = p_space.vertex_dof[pk] else {
                    continue;
                };
                for a in 0..2 {
                    // int_seg phi_k ds = l/2; dN v = (v_b - v_a)/l
                    let v = w * pv * al[a];
                    out.push((ub + a, pd, v));
                    out.push((ua + a, pd, -v));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// strip kernels with triangle quadrature (matching the full problem's
// assembly, so the eps -> 0 limit of the full operators is reproduced
// without a quadrature offset)

/// Mass <c p, q> over the strip triangles, edge-midpoint rule.
pub(crate) fn add_strip_mass(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64, f64) -> f64,
    space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if g.region != Subdomain::Fracture {
            continue;
        }
        for q in 0..3 {
            let w = coeff(g.qpoints[q][0], g.qpoints[q][1]) * g.area / 3.0;
            for i in 0..3 {
                let Some(bi) = space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    let Some(bj) = space.vertex_dof[g.verts[j]] else {
                        continue;
                    };
                    let pj = phi_at_q(j, q);
                    if pj != 0.0 {
                        out.push((bi, bj, w * pi * pj));
                    }
                }
            }
        }
    }
}

/// Coupling <p alpha, dN v> over the strip triangles; rows are vector dofs
/// of `u_space`, columns scalar dofs of `p_space`.
pub(crate) fn add_strip_coupling_dn(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    alpha: &dyn Fn(f64, f64) -> [f64; 2],
    p_space: &SpaceDescriptor,
    u_space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if g.region != Subdomain::Fracture {
            continue;
        }
        let al = alpha(g.centroid[0], g.centroid[1]);
        for i in 0..3 {
            let Some(bi) = u_space.vertex_dof[g.verts[i]] else {
                continue;
            };
            let dn = g.grad[i][0];
            for j in 0..3 {
                let Some(bj) = p_space.vertex_dof[g.verts[j]] else {
                    continue;
                };
                for a in 0..2 {
                    let v = al[a] * dn * g.area / 3.0;
                    if v != 0.0 {
                        out.push((bi + a, bj, v));
                    }
                }
            }
        }
    }
}

/// Scalar load <g, phi> over the strip triangles, edge-midpoint rule.
pub(crate) fn add_strip_load_scalar(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    g_fn: &dyn Fn(f64, f64) -> f64,
    space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if g.region != Subdomain::Fracture {
            continue;
        }
        for q in 0..3 {
            let w = g_fn(g.qpoints[q][0], g.qpoints[q][1]) * g.area / 3.0;
            for i in 0..3 {
                let Some(bi) = space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi != 0.0 {
                    rhs[bi] += w * pi;
                }
            }
        }
    }
}

/// Vector load <g, v> over the strip triangles, edge-midpoint rule.
pub(crate) fn add_strip_load_vec(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    g_fn: &dyn Fn(f64, f64) -> [f64; 2],
    space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if g.region != Subdomain::Fracture {
            continue;
        }
        for q in 0..3 {
            let gv = g_fn(g.qpoints[q][0], g.qpoints[q][1]);
            for i in 0..3 {
                let Some(bi) = space.vertex_dof[g.verts[i]] else {
                    continue;
                };
                let pi = phi_at_q(i, q);
                if pi != 0.0 {
                    for a in 0..2 {
                        rhs[bi + a] += gv[a] * pi * g.area / 3.0;
                    }
                }
            }
        }
    }
}

/// Load <g, dN v> over the strip triangles (gravity part of the fracture
/// stress), centroid coefficient.
pub(crate) fn add_strip_load_dn(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    g_fn: &dyn Fn(f64, f64) -> [f64; 2],
    space: &SpaceDescriptor,
) {
    for t in 0..mesh.n_triangles() {
        let g = tri_geom(mesh, t);
        if g.region != Subdomain::Fracture {
            continue;
        }
        let gv = g_fn(g.centroid[0], g.centroid[1]);
        for i in 0..3 {
            let Some(bi) = space.vertex_dof[g.verts[i]] else {
                continue;
            };
            let dn = g.grad[i][0];
            for a in 0..2 {
                rhs[bi + a] += gv[a] * dn * g.area;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// gamma (interface) kernels, vertex rule in the tangential coordinate

/// <c u, v> on gamma with independent row/column trace selectors. The
/// selectors return the dof of the respective trace at a station together
/// with a sign, allowing jump and single-trace patterns alike.
pub(crate) fn add_gamma_vertex_term(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64) -> f64,
    rows: &dyn Fn(usize) -> Vec<(usize, f64)>,
    cols: &dyn Fn(usize) -> Vec<(usize, f64)>,
) {
    for i in 0..mesh.n_stations() {
        let w = mesh.station_weight(i);
        let c = coeff(mesh.station_y(i));
        for (rd, rs) in rows(i) {
            for (cd, cs) in cols(i) {
                out.push((rd, cd, w * c * rs * cs));
            }
        }
    }
}

/// Consistent 1D P1 term <c r, s> on gamma with row/column trace selectors
/// (segment-midpoint coefficient; exact for constant coefficients). This is
/// the quadrature the strip integrals reduce to, so the interface couplings
/// of the reduced models match their two-scale counterparts exactly.
pub(crate) fn add_gamma_consistent_term(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64) -> f64,
    rows: &dyn Fn(usize) -> Vec<(usize, f64)>,
    cols: &dyn Fn(usize) -> Vec<(usize, f64)>,
) {
    for seg in 0..mesh.ny {
        let y0 = mesh.station_y(seg);
        let y1 = mesh.station_y(seg + 1);
        let l = y1 - y0;
        let c = coeff((y0 + y1) / 2.0) * l / 6.0;
        for (si, wi) in [(seg, 2.0), (seg + 1, 1.0)] {
            for (rd, rs) in rows(si) {
                for (cd, cs) in cols(seg) {
                    out.push((rd, cd, c * wi * rs * cs));
                }
            }
        }
        for (si, wi) in [(seg, 1.0), (seg + 1, 2.0)] {
            for (rd, rs) in rows(si) {
                for (cd, cs) in cols(seg + 1) {
                    out.push((rd, cd, c * wi * rs * cs));
                }
            }
        }
    }
}

/// 1D P1 stiffness on gamma: <a K_gamma grad p, grad q> using the
/// tangential-tangential entry of K_gamma.
pub(crate) fn add_gamma_stiffness(
    out: &mut Vec<(usize, usize, f64)>,
    mesh: &FracturedMesh,
    coeff: &dyn Fn(f64) -> f64,
    dof_at_station: &dyn Fn(usize) -> Option<usize>,
) {
    for i in 0..mesh.ny {
        let y0 = mesh.station_y(i);
        let y1 = mesh.station_y(i + 1);
        let l = y1 - y0;
        let c = coeff((y0 + y1) / 2.0) / l;
        let (Some(d0), Some(d1)) = (dof_at_station(i), dof_at_station(i + 1)) else {
            continue;
        };
        out.push((d0, d0, c));
        out.push((d1, d1, c));
        out.push((d0, d1, -c));
        out.push((d1, d0, -c));
    }
}

/// gamma load with 2-point Gauss per segment (exact through cubic
/// integrands, matching the strip reductions for affine data).
pub(crate) fn add_gamma_load_consistent(
    rhs: &mut [f64],
    mesh: &FracturedMesh,
    value: &dyn Fn(f64) -> f64,
    rows: &dyn Fn(usize) -> Vec<(usize, f64)>,
) {
    let gp = 1.0 / 3.0f64.sqrt();
    for seg in 0..mesh.ny {
        let y0 = mesh.station_y(seg);
        let y1 = mesh.station_y(seg + 1);
        let l = y1 - y0;
        let mid = (y0 + y1) / 2.0;
        for s in [-gp, gp] {
            let yg = mid + s * l / 2.0;
            let w = l / 2.0;
            let phi1 = (y1 - yg) / l;
            let phi2 = (yg - y0) / l;
            let v = value(yg) * w;
            for (rd, rs) in rows(seg) {
                rhs[rd] += v * phi1 * rs;
            }
            for (rd, rs) in rows(seg + 1) {
                rhs[rd] += v * phi2 * rs;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// public assemble entry points

/// Assemble a named bilinear form into a sparse operator sized
/// (test dofs) x (trial dofs). Load forms fill only the right-hand side of a
/// square system on the test space.
pub fn assemble(
    spec: &FormSpec,
    trial: &SpaceDescriptor,
    test: &SpaceDescriptor,
    mesh: &FracturedMesh,
    materials: &MaterialFields,
    effective: Option<&EffectiveParams>,
) -> Result<SparseSystem> {
    let pre = match spec.kind {
        FormKind::AHat | FormKind::BHat | FormKind::CHat | FormKind::DHat | FormKind::LHat => {
            let eps = spec
                .epsilon
                .ok_or_else(|| Error::Assembly(format!("{:?} requires epsilon", spec.kind)))?;
            if eps <= 0.0 {
                return Err(Error::Assembly("epsilon must be positive".into()));
            }
            let exponents = spec
                .exponents
                .ok_or_else(|| Error::Assembly(format!("{:?} requires exponents", spec.kind)))?;
            Prefactor::Full { eps, exponents }
        }
        _ => Prefactor::BulkOnly,
    };
    let need_eff = matches!(
        spec.kind,
        FormKind::InterfaceMassJump
            | FormKind::GammaStiffness
            | FormKind::GammaMass
            | FormKind::CouplingAlphaEff
    );
    if need_eff && effective.is_none() {
        return Err(Error::Assembly(format!(
            "{:?} requires effective parameters",
            spec.kind
        )));
    }

    let mut sys = SparseSystem::new(test.n_dofs, trial.n_dofs);
    match spec.kind {
        FormKind::AHat | FormKind::Ab0 => {
            let pre = if spec.kind == FormKind::Ab0 {
                Prefactor::BulkOnly
            } else {
                pre
            };
            add_elasticity(&mut sys.triplets, mesh, materials, &pre, trial);
        }
        FormKind::BHat | FormKind::Bb0 => {
            let pre = if spec.kind == FormKind::Bb0 {
                Prefactor::BulkOnly
            } else {
                pre
            };
            add_biot_coupling(&mut sys.triplets, mesh, materials, &pre, trial, test);
        }
        FormKind::CHat | FormKind::Cb0 => {
            let pre = if spec.kind == FormKind::Cb0 {
                Prefactor::BulkOnly
            } else {
                pre
            };
            add_storage_mass(&mut sys.triplets, mesh, materials, &pre, trial);
        }
        FormKind::DHat | FormKind::Db0 => {
            let pre = if spec.kind == FormKind::Db0 {
                Prefactor::BulkOnly
            } else {
                pre
            };
            add_darcy_stiffness(&mut sys.triplets, mesh, materials, &pre, trial);
        }
        FormKind::LHat | FormKind::Lb0 => {
            let pre = if spec.kind == FormKind::Lb0 {
                Prefactor::BulkOnly
            } else {
                pre
            };
            add_mech_load(&mut sys.rhs, mesh, materials, &pre, test, spec.time);
        }
        FormKind::FractureNormalStiffness => {
            let cfn = |s: f64, y: f64| materials.elast_frac.eval([s, y]).normal_tensor([1.0, 0.0]);
            add_column_stiffness_vec(&mut sys.triplets, mesh, &cfn, trial);
        }
        FormKind::FractureNormalConductivity => {
            let kfn = |s: f64, y: f64| {
                let k = materials.cond_frac.eval([s, y]);
                k[0][0]
            };
            add_column_stiffness_scalar(&mut sys.triplets, mesh, &kfn, trial);
        }
        FormKind::InterfaceMassJump => {
            let eff = effective.unwrap();
            let mesh_ref = mesh;
            let coeff =
                |y: f64| eff.k_gamma_n_at(mesh_ref, y) / mesh_ref.geometry.total_aperture(y);
            let jump = |space: &SpaceDescriptor, i: usize| -> Vec<(usize, f64)> {
                let mut v = Vec::new();
                if let Some(d) = space.dof(mesh_ref.gamma_plus_vertex(i), 0) {
                    v.push((d, 1.0));
                }
                if let Some(d) = space.dof(mesh_ref.gamma_minus_vertex(i), 0) {
                    v.push((d, -1.0));
                }
                v
            };
            add_gamma_vertex_term(&mut sys.triplets, mesh, &coeff, &|i| jump(test, i), &|i| {
                jump(trial, i)
            });
        }
        FormKind::GammaStiffness => {
            let eff = effective.unwrap();
            let mesh_ref = mesh;
            let coeff = |y: f64| {
                mesh_ref.geometry.total_aperture(y) * eff.k_gamma_tangential_at(mesh_ref, y)
            };
            add_gamma_stiffness(&mut sys.triplets, mesh, &coeff, &|i| {
                trial.dof(mesh_ref.gamma_plus_vertex(i), 0)
            });
        }
        FormKind::GammaMass => {
            let eff = effective.unwrap();
            let mesh_ref = mesh;
            let coeff =
                |y: f64| mesh_ref.geometry.total_aperture(y) * eff.omega_gamma_at(mesh_ref, y);
            let tr = |space: &SpaceDescriptor, i: usize| -> Vec<(usize, f64)> {
                space
                    .dof(mesh_ref.gamma_plus_vertex(i), 0)
                    .map(|d| (d, 1.0))
                    .into_iter()
                    .collect()
            };
            add_gamma_vertex_term(&mut sys.triplets, mesh, &coeff, &|i| tr(test, i), &|i| {
                tr(trial, i)
            });
        }
        FormKind::CouplingAlphaEff => {
            let eff = effective.unwrap();
            let alpha = |s: f64, y: f64| eff.alpha_f_eff_at(s, y);
            add_column_coupling(&mut sys.triplets, mesh, &alpha, trial, test);
        }
    }
    Ok(sys)
}

/// Assemble a load form (LHat/Lb0 plus the flow source) on a space.
pub fn assemble_load(
    spec: &FormSpec,
    space: &SpaceDescriptor,
    mesh: &FracturedMesh,
    materials: &MaterialFields,
) -> Result<Vec<f64>> {
    let sys = assemble(spec, space, space, mesh, materials, None)?;
    Ok(sys.rhs)
}

/// Symmetric constraint elimination. `values` assigns boundary values to
/// Dirichlet dofs (zero by default); giving a value for an unconstrained dof
/// is an error.
pub fn apply_constraints(
    system: &SparseSystem,
    space: &SpaceDescriptor,
    values: &[(usize, f64)],
) -> Result<SparseSystem> {
    if system.n_rows != space.n_dofs || system.n_cols != space.n_dofs {
        return Err(Error::Assembly(
            "constraint application needs a square system on the space".into(),
        ));
    }
    let mut bc = vec![0.0; space.n_dofs];
    for &(d, v) in values {
        if !space.dirichlet[d] {
            return Err(Error::Assembly(format!(
                "boundary value given for unconstrained dof {d}"
            )));
        }
        bc[d] = v;
    }
    let mut out = SparseSystem::new(system.n_rows, system.n_cols);
    out.rhs = system.rhs.clone();
    for &(i, j, v) in &system.triplets {
        let ci = space.dirichlet[i];
        let cj = space.dirichlet[j];
        if ci {
            continue;
        }
        if cj {
            out.rhs[i] -= v * bc[j];
        } else {
            out.triplets.push((i, j, v));
        }
    }
    for d in 0..space.n_dofs {
        if space.dirichlet[d] {
            out.triplets.push((d, d, 1.0));
            out.rhs[d] = bc[d];
        }
    }
    Ok(out)
}

/// eps-scaled gradient of a P1 field on one element: plain gradient in the
/// bulk, x component divided by eps in the strip. Scalar fields return the
/// gradient in `out[0]`; vector fields fill the full Jacobian rows.
pub fn eval_scaled_gradient(
    mesh: &FracturedMesh,
    space: &SpaceDescriptor,
    coeffs: &[f64],
    element: usize,
    epsilon: f64,
) -> Result<[[f64; 2]; 2]> {
    if epsilon <= 0.0 {
        return Err(Error::Assembly("epsilon must be positive".into()));
    }
    let g = tri_geom(mesh, element);
    let eps = if g.region == Subdomain::Fracture {
        Some(epsilon)
    } else {
        None
    };
    let mut out = [[0.0; 2]; 2];
    for i in 0..3 {
        let Some(b) = space.vertex_dof[g.verts[i]] else {
            continue;
        };
        let gr = scale_grad(g.grad[i], g.region, eps);
        for c in 0..space.ncomp {
            for l in 0..2 {
                out[c][l] += coeffs[b + c] * gr[l];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Ratio;
    use crate::geometry::Geometry;
    use crate::mesh::build_mesh;
    use crate::spaces::{build_space, SpaceKind};

    fn exps(nu_c: i64, nu_k: i64, nu_omega: i64) -> ScalingExponents {
        ScalingExponents::new(
            Ratio::int(nu_c),
            Ratio::int(nu_k),
            Ratio::int(nu_omega),
            Ratio::int(0),
            Ratio::int(0),
            Ratio::int(-1),
            Ratio::int(-1),
        )
    }

    #[test]
    fn scaled_gradient_examples() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        let phi = build_space(&mesh, SpaceKind::PhiGt1).unwrap();
        let v = build_space(&mesh, SpaceKind::VFull).unwrap();

        // phi(x) = x . N on a fracture element with eps = 0.1 -> gradient 10 N
        let vfull = build_space(&mesh, SpaceKind::PhiFull).unwrap();
        let mut coeffs = vec![0.0; vfull.n_dofs];
        for vx in 0..mesh.n_vertices() {
            if let Some(d) = vfull.vertex_dof[vx] {
                let (r, p) = mesh.logical_coords(vx);
                // normal coordinate: s in the strip, x in the bulk
                coeffs[d] = if r == Subdomain::Fracture { p[0] } else { p[0] };
            }
        }
        let frac_el = (0..mesh.n_triangles())
            .find(|&t| mesh.triangle_region[t] == Subdomain::Fracture)
            .unwrap();
        let g = eval_scaled_gradient(&mesh, &vfull, &coeffs, frac_el, 0.1).unwrap();
        assert!((g[0][0] - 10.0).abs() < 1e-10);
        assert!(g[0][1].abs() < 1e-10);

        // tangential field: unchanged by eps
        for vx in 0..mesh.n_vertices() {
            if let Some(d) = vfull.vertex_dof[vx] {
                coeffs[d] = mesh.logical_coords(vx).1[1];
            }
        }
        let g = eval_scaled_gradient(&mesh, &vfull, &coeffs, frac_el, 0.3).unwrap();
        assert!((g[0][1] - 1.0).abs() < 1e-10 && g[0][0].abs() < 1e-10);

        // normal displacement v = (x.N) N with eps = 1/4 -> scaled strain 4 N N^t
        let mut uc = vec![0.0; v.n_dofs];
        for vx in 0..mesh.n_vertices() {
            if let Some(d) = v.vertex_dof[vx] {
                let (r, p) = mesh.logical_coords(vx);
                if r == Subdomain::Fracture {
                    uc[d] = p[0];
                }
            }
        }
        let j = eval_scaled_gradient(&mesh, &v, &uc, frac_el, 0.25).unwrap();
        let e00 = j[0][0];
        assert!((e00 - 4.0).abs() < 1e-10, "{e00}");
        let _ = phi;
        assert!(eval_scaled_gradient(&mesh, &v, &uc, frac_el, 0.0).is_err());
    }

    #[test]
    fn chat_exponent_cancels_for_nu_omega_m1() {
        // C_hat with omega = 1, nu_omega = -1: fracture block equals the
        // plain mass matrix for any eps
        let mesh = build_mesh(&Geometry::default_unit(), 0.5).unwrap();
        let mat = MaterialFields::unit();
        let sp = build_space(&mesh, SpaceKind::PhiGt1).unwrap();
        let spf = build_space(&mesh, SpaceKind::PhiFull).unwrap();
        let _ = sp;
        let a = assemble(
            &FormSpec::full(FormKind::CHat, 0.37, exps(1, -1, -1)),
            &spf,
            &spf,
            &mesh,
            &mat,
            None,
        )
        .unwrap();
        let b = assemble(
            &FormSpec::full(FormKind::CHat, 1.0, exps(1, -1, -1)),
            &spf,
            &spf,
            &mesh,
            &mat,
            None,
        )
        .unwrap();
        let da = a.to_dense();
        let db = b.to_dense();
        for (x, y) in da.iter().zip(db.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn assembly_is_linear_in_coefficients() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.5).unwrap();
        let sp = build_space(&mesh, SpaceKind::PhiFull).unwrap();
        let mut m1 = MaterialFields::unit();
        m1.cond_plus = crate::materials::MatrixField::identity(1.3);
        m1.cond_minus = crate::materials::MatrixField::identity(0.8);
        m1.cond_frac = crate::materials::MatrixField::identity(2.1);
        let mut m2 = m1.clone();
        m2.cond_plus = crate::materials::MatrixField::identity(2.6);
        m2.cond_minus = crate::materials::MatrixField::identity(1.6);
        m2.cond_frac = crate::materials::MatrixField::identity(4.2);
        let spec = FormSpec::full(FormKind::DHat, 0.5, exps(1, 1, -1));
        let a = assemble(&spec, &sp, &sp, &mesh, &m1, None)
            .unwrap()
            .to_dense();
        let b = assemble(&spec, &sp, &sp, &mesh, &m2, None)
            .unwrap()
            .to_dense();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((2.0 * x - y).abs() < 1e-14 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn dhat_fracture_scaling_on_patch() {
        // K = I, nu_K = 1, eps = 1/2: normal-normal entries carry
        // eps^(nu_K+1) eps^-2 = 1, tangential eps^2 = 1/4. Hand-assembled
        // 2-triangle patch on the strip.
        let mesh = build_mesh(&Geometry::default_unit(), 0.5).unwrap();
        let mat = MaterialFields::unit();
        let spf = build_space(&mesh, SpaceKind::PhiFull).unwrap();
        let eps = 0.5;
        let sys = assemble(
            &FormSpec::full(FormKind::DHat, eps, exps(1, 1, -1)),
            &spf,
            &spf,
            &mesh,
            &mat,
            None,
        )
        .unwrap();
        // hand assembly over the fracture triangles: per triangle
        // area * (gx_i gx_j * (eps^(nu_K+1)/eps^2) + gy_i gy_j * eps^(nu_K+1))
        let mut hand = vec![0.0; spf.n_dofs * spf.n_dofs];
        for t in 0..mesh.n_triangles() {
            let g = tri_geom(&mesh, t);
            let scale = if g.region == Subdomain::Fracture {
                eps * eps
            } else {
                1.0
            };
            let esc = if g.region == Subdomain::Fracture {
                eps
            } else {
                1.0
            };
            for i in 0..3 {
                let di = spf.vertex_dof[g.verts[i]].unwrap();
                for j in 0..3 {
                    let dj = spf.vertex_dof[g.verts[j]].unwrap();
                    let v = scale
                        * g.area
                        * (g.grad[i][0] / esc * (g.grad[j][0] / esc) + g.grad[i][1] * g.grad[j][1]);
                    hand[di * spf.n_dofs + dj] += v;
                }
            }
        }
        let dense = sys.to_dense();
        for (x, y) in dense.iter().zip(hand.iter()) {
            assert!((x - y).abs() < 1e-13, "{x} vs {y}");
        }
    }

    #[test]
    fn constraints_keep_symmetry_and_values() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.5).unwrap();
        let mat = MaterialFields::unit();
        let v = build_space(&mesh, SpaceKind::VFull).unwrap();
        let sys = assemble(
            &FormSpec::full(FormKind::AHat, 1.0, exps(1, -1, -1)),
            &v,
            &v,
            &mesh,
            &mat,
            None,
        )
        .unwrap();
        let fixed = apply_constraints(&sys, &v, &[]).unwrap();
        assert!(fixed.max_asymmetry() < 1e-14);
        // a single constrained dof with value 1 solves to exactly 1
        let d = (0..v.n_dofs).find(|&d| v.dirichlet[d]).unwrap();
        let fixed2 = apply_constraints(&sys, &v, &[(d, 1.0)]).unwrap();
        let sol = fixed2.to_skyline().factorize().unwrap().solve(&fixed2.rhs);
        assert!((sol[d] - 1.0).abs() < 1e-12);
        // all-Dirichlet with zero values and zero rhs gives the zero solution
        let freeless = {
            let mut s = sys.clone();
            s.rhs.iter_mut().for_each(|r| *r = 0.0);
            apply_constraints(&s, &v, &[]).unwrap()
        };
        let sol = freeless
            .to_skyline()
            .factorize()
            .unwrap()
            .solve(&freeless.rhs);
        let du = sol.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        // rhs is zero, so only Dirichlet dofs are constrained to zero and the
        // free block solves a homogeneous SPD system
        assert!(du < 1e-12);
        // value on an unconstrained dof is rejected
        let free = (0..v.n_dofs).find(|&d| !v.dirichlet[d]).unwrap();
        assert!(apply_constraints(&sys, &v, &[(free, 1.0)]).is_err());
    }
}
