//! Discrete norms: exact P1 quadrature in space, trapezoidal rule in time,
//! backward differences for time derivatives. Fields are stored nodally per
//! mesh vertex so that solutions from different spaces can be compared on
//! the same mesh.

use crate::mesh::{FracturedMesh, Subdomain};
use crate::spaces::SpaceDescriptor;
use crate::{Error, Result};

/// Nodal field on the whole mesh; regions a space does not cover are flagged.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub ncomp: usize,
    /// values indexed by vertex * ncomp + comp
    pub values: Vec<f64>,
    pub has_plus: bool,
    pub has_minus: bool,
    pub has_frac: bool,
}

impl FieldSet {
    pub fn zeros(mesh: &FracturedMesh, ncomp: usize) -> Self {
        FieldSet {
            ncomp,
            values: vec![0.0; mesh.n_vertices() * ncomp],
            has_plus: true,
            has_minus: true,
            has_frac: true,
        }
    }

    /// Extract nodal values from a coefficient vector on a space.
    pub fn from_coeffs(mesh: &FracturedMesh, space: &SpaceDescriptor, coeffs: &[f64]) -> Self {
        let ncomp = space.ncomp;
        let mut values = vec![0.0; mesh.n_vertices() * ncomp];
        let mut has = [true, true, true];
        for v in 0..mesh.n_vertices() {
            match space.vertex_dof[v] {
                Some(b) => {
                    for c in 0..ncomp {
                        values[v * ncomp + c] = coeffs[b + c];
                    }
                }
                None => {
                    let k = match mesh.vertex_region[v] {
                        Subdomain::Plus => 0,
                        Subdomain::Minus => 1,
                        Subdomain::Fracture => 2,
                    };
                    has[k] = false;
                }
            }
        }
        FieldSet {
            ncomp,
            values,
            has_plus: has[0],
            has_minus: has[1],
            has_frac: has[2],
        }
    }

    #[inline]
    pub fn at(&self, vertex: usize, comp: usize) -> f64 {
        self.values[vertex * self.ncomp + comp]
    }

    /// a - b on the regions both cover.
    pub fn diff(&self, other: &FieldSet) -> FieldSet {
        assert_eq!(self.ncomp, other.ncomp);
        FieldSet {
            ncomp: self.ncomp,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b)
                .collect(),
            has_plus: self.has_plus && other.has_plus,
            has_minus: self.has_minus && other.has_minus,
            has_frac: self.has_frac && other.has_frac,
        }
    }

    /// Multiply the fracture nodal values by a factor.
    pub fn scale_fracture(&self, mesh: &FracturedMesh, factor: f64) -> FieldSet {
        let mut out = self.clone();
        for v in 0..mesh.n_vertices() {
            if mesh.vertex_region[v] == Subdomain::Fracture {
                for c in 0..self.ncomp {
                    out.values[v * self.ncomp + c] *= factor;
                }
            }
        }
        out
    }

    pub fn axpy(&mut self, a: f64, x: &FieldSet) {
        for (v, xv) in self.values.iter_mut().zip(x.values.iter()) {
            *v += a * xv;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2Bulk,
    H1Bulk,
    L2Frac,
    /// L2 plus normal-derivative seminorm on the strip
    Hn1Frac,
    H1Frac,
    L2Gamma,
}

/// Optional fracture scaling: contributions from the strip are multiplied by
/// `factor`; when `eps` is set, gradients use the eps-scaled normal part.
#[derive(Debug, Clone, Copy)]
pub struct FracScaling {
    pub factor: f64,
    pub eps: Option<f64>,
}

impl Default for FracScaling {
    fn default() -> Self {
        FracScaling {
            factor: 1.0,
            eps: None,
        }
    }
}

fn region_of(k: NormKind) -> &'static [Subdomain] {
    match k {
        NormKind::L2Bulk | NormKind::H1Bulk => &[Subdomain::Plus, Subdomain::Minus],
        _ => &[Subdomain::Fracture],
    }
}

/// Exact integral of the square of a P1 field over one region (all comps).
pub fn l2_sq_region(mesh: &FracturedMesh, f: &FieldSet, region: Subdomain) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != region {
            continue;
        }
        let area = mesh.triangle_area(t);
        let [a, b, c] = mesh.triangles[t];
        for comp in 0..f.ncomp {
            let (u1, u2, u3) = (f.at(a, comp), f.at(b, comp), f.at(c, comp));
            acc += area / 6.0 * (u1 * u1 + u2 * u2 + u3 * u3 + u1 * u2 + u1 * u3 + u2 * u3);
        }
    }
    acc
}

/// Squared gradient seminorm over a region, optionally eps-scaling the
/// normal component inside the strip.
pub fn grad_sq_region(
    mesh: &FracturedMesh,
    f: &FieldSet,
    region: Subdomain,
    eps: Option<f64>,
) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != region {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        for comp in 0..f.ncomp {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for i in 0..3 {
                let v = f.at(g.verts[i], comp);
                gx += v * g.grad[i][0];
                gy += v * g.grad[i][1];
            }
            if region == Subdomain::Fracture {
                if let Some(e) = eps {
                    gx /= e;
                }
            }
            acc += g.area * (gx * gx + gy * gy);
        }
    }
    acc
}

/// Squared normal-derivative seminorm over the strip.
pub fn dn_sq_frac(mesh: &FracturedMesh, f: &FieldSet) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        for comp in 0..f.ncomp {
            let mut gx = 0.0;
            for i in 0..3 {
                gx += f.at(g.verts[i], comp) * g.grad[i][0];
            }
            acc += g.area * gx * gx;
        }
    }
    acc
}

/// Squared tangential strain seminorm |e_par(u)|^2 over the strip.
pub fn epar_sq_frac(mesh: &FracturedMesh, u: &FieldSet) -> f64 {
    assert_eq!(u.ncomp, 2);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        // Jacobian J[a][l]
        let mut j = [[0.0; 2]; 2];
        for i in 0..3 {
            for a in 0..2 {
                let v = u.at(g.verts[i], a);
                j[a][0] += v * g.grad[i][0];
                j[a][1] += v * g.grad[i][1];
            }
        }
        // J_par zeroes the normal (x) column; e_par = sym(J_par)
        let e01 = 0.5 * j[0][1];
        let e11 = j[1][1];
        acc += g.area * (e11 * e11 + 2.0 * e01 * e01);
    }
    acc
}

/// Squared eps-scaled strain norm |e^eps(u)|^2 over the strip times factor^2.
pub fn eeps_sq_frac(mesh: &FracturedMesh, u: &FieldSet, eps: f64) -> f64 {
    assert_eq!(u.ncomp, 2);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] != Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        let mut j = [[0.0; 2]; 2];
        for i in 0..3 {
            for a in 0..2 {
                let v = u.at(g.verts[i], a);
                j[a][0] += v * g.grad[i][0] / eps;
                j[a][1] += v * g.grad[i][1];
            }
        }
        let e = [
            [j[0][0], 0.5 * (j[0][1] + j[1][0])],
            [0.5 * (j[0][1] + j[1][0]), j[1][1]],
        ];
        acc += g.area * (e[0][0] * e[0][0] + 2.0 * e[0][1] * e[0][1] + e[1][1] * e[1][1]);
    }
    acc
}

/// Squared strain norm over the bulk blocks.
pub fn strain_sq_bulk(mesh: &FracturedMesh, u: &FieldSet) -> f64 {
    assert_eq!(u.ncomp, 2);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        if mesh.triangle_region[t] == Subdomain::Fracture {
            continue;
        }
        let g = crate::assembly::tri_geom(mesh, t);
        let mut j = [[0.0; 2]; 2];
        for i in 0..3 {
            for a in 0..2 {
                let v = u.at(g.verts[i], a);
                j[a][0] += v * g.grad[i][0];
                j[a][1] += v * g.grad[i][1];
            }
        }
        let e01 = 0.5 * (j[0][1] + j[1][0]);
        acc += g.area * (j[0][0] * j[0][0] + 2.0 * e01 * e01 + j[1][1] * j[1][1]);
    }
    acc
}

/// Exact L2 norm squared of a P1 function on gamma given station values.
pub fn l2_gamma_sq(mesh: &FracturedMesh, station_vals: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..mesh.ny {
        let l = mesh.station_y(i + 1) - mesh.station_y(i);
        let (a, b) = (station_vals[i], station_vals[i + 1]);
        acc += l / 3.0 * (a * a + a * b + b * b);
    }
    acc
}

/// Trace of a nodal field on gamma from one bulk side.
pub fn gamma_trace(mesh: &FracturedMesh, f: &FieldSet, plus_side: bool, comp: usize) -> Vec<f64> {
    (0..mesh.n_stations())
        .map(|i| {
            let v = if plus_side {
                mesh.gamma_plus_vertex(i)
            } else {
                mesh.gamma_minus_vertex(i)
            };
            f.at(v, comp)
        })
        .collect()
}

/// Trace of a fracture nodal field on a strip edge (gamma_+^1 or gamma_-^1).
pub fn strip_edge_trace(
    mesh: &FracturedMesh,
    f: &FieldSet,
    plus_edge: bool,
    comp: usize,
) -> Vec<f64> {
    let layer = if plus_edge { mesh.n_layers } else { 0 };
    (0..mesh.n_stations())
        .map(|i| f.at(mesh.frac_vertex(layer, i), comp))
        .collect()
}

/// Spatial norm dispatch per the named kinds.
pub fn compute_norm(
    mesh: &FracturedMesh,
    f: &FieldSet,
    kind: NormKind,
    frac: Option<FracScaling>,
) -> Result<f64> {
    let fs = frac.unwrap_or_default();
    for r in region_of(kind) {
        let ok = match r {
            Subdomain::Plus => f.has_plus,
            Subdomain::Minus => f.has_minus,
            Subdomain::Fracture => f.has_frac,
        };
        if !ok {
            return Err(Error::Study(format!(
                "field does not cover {:?} needed by {:?}",
                r, kind
            )));
        }
    }
    let v = match kind {
        NormKind::L2Bulk => {
            l2_sq_region(mesh, f, Subdomain::Plus) + l2_sq_region(mesh, f, Subdomain::Minus)
        }
        NormKind::H1Bulk => {
            l2_sq_region(mesh, f, Subdomain::Plus)
                + l2_sq_region(mesh, f, Subdomain::Minus)
                + grad_sq_region(mesh, f, Subdomain::Plus, None)
                + grad_sq_region(mesh, f, Subdomain::Minus, None)
        }
        NormKind::L2Frac => fs.factor * fs.factor * l2_sq_region(mesh, f, Subdomain::Fracture),
        NormKind::Hn1Frac => {
            fs.factor
                * fs.factor
                * (l2_sq_region(mesh, f, Subdomain::Fracture) + dn_sq_frac(mesh, f))
        }
        NormKind::H1Frac => {
            fs.factor
                * fs.factor
                * (l2_sq_region(mesh, f, Subdomain::Fracture)
                    + grad_sq_region(mesh, f, Subdomain::Fracture, fs.eps))
        }
        NormKind::L2Gamma => {
            let tr = gamma_trace(mesh, f, true, 0);
            l2_gamma_sq(mesh, &tr)
        }
    };
    Ok(v.sqrt())
}

// ---------------------------------------------------------------------------
// time composition

/// Trapezoidal integral of squared values over the time grid, square-rooted.
pub fn l2_time(times: &[f64], vals_sq: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (vals_sq[k] + vals_sq[k - 1]);
    }
    acc.sqrt()
}

pub fn linf_time(vals: &[f64]) -> f64 {
    vals.iter().cloned().fold(0.0, f64::max)
}

/// L2-in-time norm of the backward-difference time derivative: the
/// difference quotient is constant per interval, so the integral is exact.
pub fn l2_time_derivative(times: &[f64], spatial_sq_of_diff: &[f64]) -> f64 {
    // spatial_sq_of_diff[k] = || f_{k+1} - f_k ||^2 for k = 0..M-1
    let mut acc = 0.0;
    for k in 0..spatial_sq_of_diff.len() {
        let dt = times[k + 1] - times[k];
        acc += spatial_sq_of_diff[k] / dt;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::mesh::build_mesh;

    #[test]
    fn constant_field_norms() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        let mut f = FieldSet::zeros(&mesh, 1);
        f.values.iter_mut().for_each(|v| *v = 1.0);
        // unit square bulk: L2 of 1 over plus block alone is 1
        let l2p = l2_sq_region(&mesh, &f, Subdomain::Plus).sqrt();
        assert!((l2p - 1.0).abs() < 1e-13);
        let n = compute_norm(&mesh, &f, NormKind::L2Bulk, None).unwrap();
        assert!((n - 2.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn normal_derivative_of_s() {
        // phi = s on the strip with a = 1 over gamma length 1: ||dN phi|| = 1
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        let mut f = FieldSet::zeros(&mesh, 1);
        for v in 0..mesh.n_vertices() {
            let (r, p) = mesh.logical_coords(v);
            if r == Subdomain::Fracture {
                f.values[v] = p[0];
            }
        }
        assert!((dn_sq_frac(&mesh, &f).sqrt() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gamma_l2_of_sine_converges() {
        let mesh = build_mesh(&Geometry::default_unit(), 1.0 / 64.0).unwrap();
        let vals: Vec<f64> = (0..mesh.n_stations())
            .map(|i| (std::f64::consts::PI * mesh.station_y(i)).sin())
            .collect();
        let n = l2_gamma_sq(&mesh, &vals).sqrt();
        // analytic value sqrt(1/2); P1 interpolation error O(h^2)
        assert!((n - 0.5f64.sqrt()).abs() < 1e-3, "{n}");
    }

    #[test]
    fn time_rules() {
        let times = [0.0, 0.5, 1.0];
        // f(t) = t: L2(0,1) of t is 1/sqrt(3); trapezoid on t^2 overestimates slightly
        let vals_sq = [0.0, 0.25, 1.0];
        let l2 = l2_time(&times, &vals_sq);
        assert!((l2 * l2 - 0.375).abs() < 1e-15);
        assert!((linf_time(&[1.0, 3.0, 2.0]) - 3.0).abs() < 1e-15);
        // derivative of [0, 0.5, 1.0]: quotient 1 on both intervals
        let d = l2_time_derivative(&times, &[0.25, 0.25]);
        assert!((d - 1.0).abs() < 1e-14);
    }
}
