//! Structured conforming triangulation of the transformed geometry: two
//! bulk grids abutting gamma plus a tensor-grid fracture strip whose
//! columns realize the normal-line integrals exactly.
//!
//! The rescaled strip is embedded in its own chart to the right of the
//! bulk blocks so that the three subdomains are geometrically disjoint;
//! the normal coordinate of a strip vertex is `x - chart_offset`.

use crate::geometry::{BoundarySegment, FlowBc, Geometry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Plus,
    Minus,
    Fracture,
}

impl Subdomain {
    pub fn label(&self) -> &'static str {
        match self {
            Subdomain::Plus => "plus",
            Subdomain::Minus => "minus",
            Subdomain::Fracture => "fracture",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetTag {
    DirichletFlow,
    NeumannFlow,
    GammaPlusSide,
    GammaMinusSide,
}

/// One normal column of the fracture strip: the strip vertices over a
/// gamma station, ordered from s = -a_-(y) to s = +a_+(y).
#[derive(Debug, Clone)]
pub struct NormalColumn {
    pub station: usize,
    pub y: f64,
    pub vertices: Vec<usize>,
    /// segment lengths between consecutive column vertices
    pub seg_len: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FracturedMesh {
    pub geometry: Geometry,
    pub vertices: Vec<[f64; 2]>,
    pub vertex_region: Vec<Subdomain>,
    pub triangles: Vec<[usize; 3]>,
    pub triangle_region: Vec<Subdomain>,
    /// boundary facets as vertex pairs with their tag
    pub facets: Vec<(usize, usize, FacetTag)>,
    /// strip vertex on gamma_+^1 paired with the bulk-plus gamma vertex, per station
    pub pairing_plus: Vec<(usize, usize)>,
    /// strip vertex on gamma_-^1 paired with the bulk-minus gamma vertex, per station
    pub pairing_minus: Vec<(usize, usize)>,
    pub columns: Vec<NormalColumn>,
    /// gamma endpoint Dirichlet tags (y = y0 end, y = y1 end)
    pub gamma_dirichlet: (bool, bool),
    /// vertices lying on the closure of a flow-Dirichlet external segment
    pub flow_dirichlet_vertices: Vec<bool>,
    /// vertices lying on any external boundary (displacement is fixed there)
    pub external_vertices: Vec<bool>,
    pub chart_offset: f64,
    // grid dimensions
    pub ny: usize,
    pub nx_plus: usize,
    pub nx_minus: usize,
    pub n_layers: usize,
    plus_base: usize,
    minus_base: usize,
    frac_base: usize,
}

impl FracturedMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn n_stations(&self) -> usize {
        self.ny + 1
    }

    /// Bulk-plus grid vertex, ix in 0..=nx_plus (x ascending), iy in 0..=ny.
    pub fn plus_vertex(&self, ix: usize, iy: usize) -> usize {
        self.plus_base + ix * (self.ny + 1) + iy
    }
    pub fn minus_vertex(&self, ix: usize, iy: usize) -> usize {
        self.minus_base + ix * (self.ny + 1) + iy
    }
    /// Strip vertex at layer j (s ascending), station i.
    pub fn frac_vertex(&self, layer: usize, station: usize) -> usize {
        self.frac_base + layer * (self.ny + 1) + station
    }
    pub fn gamma_plus_vertex(&self, station: usize) -> usize {
        self.plus_vertex(0, station)
    }
    pub fn gamma_minus_vertex(&self, station: usize) -> usize {
        self.minus_vertex(self.nx_minus, station)
    }
    pub fn station_y(&self, station: usize) -> f64 {
        self.vertices[self.gamma_plus_vertex(station)][1]
    }

    /// Trapezoidal weight of a gamma station (vertex quadrature on gamma).
    pub fn station_weight(&self, station: usize) -> f64 {
        let n = self.ny;
        let y = |i: usize| self.station_y(i);
        if station == 0 {
            0.5 * (y(1) - y(0))
        } else if station == n {
            0.5 * (y(n) - y(n - 1))
        } else {
            0.5 * (y(station + 1) - y(station - 1))
        }
    }

    /// Logical coordinates: bulk vertices keep (x, y); strip vertices map to
    /// (s, y) with s the normal coordinate.
    pub fn logical_coords(&self, v: usize) -> (Subdomain, [f64; 2]) {
        let r = self.vertex_region[v];
        let p = self.vertices[v];
        match r {
            Subdomain::Fracture => (r, [p[0] - self.chart_offset, p[1]]),
            _ => (r, p),
        }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Locate a point: containing triangle and barycentric coordinates, or
    /// None when the point lies outside every subdomain.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangles[t];
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let pc = self.vertices[c];
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            let l1 = ((pb[0] - x) * (pc[1] - y) - (pc[0] - x) * (pb[1] - y)) / det;
            let l2 = ((pc[0] - x) * (pa[1] - y) - (pa[0] - x) * (pc[1] - y)) / det;
            let l3 = 1.0 - l1 - l2;
            let tol = -1e-12;
            if l1 >= tol && l2 >= tol && l3 >= tol {
                return Some((t, [l1, l2, l3]));
            }
        }
        None
    }

    /// Plain-text dump: vertex table, triangle table, tag tables.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# vertices: id x y region\n");
        for (i, p) in self.vertices.iter().enumerate() {
            s.push_str(&format!(
                "{} {:.16e} {:.16e} {}\n",
                i,
                p[0],
                p[1],
                self.vertex_region[i].label()
            ));
        }
        s.push_str("# triangles: id v0 v1 v2 region\n");
        for (t, tri) in self.triangles.iter().enumerate() {
            s.push_str(&format!(
                "{} {} {} {} {}\n",
                t,
                tri[0],
                tri[1],
                tri[2],
                self.triangle_region[t].label()
            ));
        }
        s.push_str("# facets: v0 v1 tag\n");
        for (a, b, tag) in &self.facets {
            let tag = match tag {
                FacetTag::DirichletFlow => "dirichlet_flow",
                FacetTag::NeumannFlow => "neumann_flow",
                FacetTag::GammaPlusSide => "gamma_plus_side",
                FacetTag::GammaMinusSide => "gamma_minus_side",
            };
            s.push_str(&format!("{} {} {}\n", a, b, tag));
        }
        s.push_str("# interface pairings: frac_vertex bulk_vertex side\n");
        for (f, b) in &self.pairing_plus {
            s.push_str(&format!("{} {} plus\n", f, b));
        }
        for (f, b) in &self.pairing_minus {
            s.push_str(&format!("{} {} minus\n", f, b));
        }
        s
    }
}

/// Build the structured mesh with target edge length `h`.
pub fn build_mesh(geometry: &Geometry, h: f64) -> Result<FracturedMesh> {
    if h <= 0.0 {
        return Err(Error::Mesh("non-positive target edge length".into()));
    }
    geometry.validate(256)?;

    let (g0, g1) = geometry.gamma_range();
    let gamma_len = g1 - g0;
    let ny = ((gamma_len / h).round() as usize).max(1);
    let nx_plus = ((geometry.bulk_plus.width() / h).round() as usize).max(1);
    let nx_minus = ((geometry.bulk_minus.width() / h).round() as usize).max(1);
    // mean total aperture fixes the layer count
    let mut mean_a = 0.0;
    for i in 0..=ny {
        mean_a += geometry.total_aperture(g0 + gamma_len * (i as f64) / (ny as f64));
    }
    mean_a /= (ny + 1) as f64;
    let n_layers = ((mean_a / h).round() as usize).max(1);

    let mut max_aminus: f64 = 0.0;
    for i in 0..=ny {
        let y = g0 + gamma_len * (i as f64) / (ny as f64);
        max_aminus = max_aminus.max(geometry.aperture_minus.eval(y));
    }
    let chart_offset = geometry.bulk_plus.x1 + 1.0 + max_aminus;

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut vertex_region: Vec<Subdomain> = Vec::new();
    let station_y = |i: usize| g0 + gamma_len * (i as f64) / (ny as f64);

    // minus block, x-slices ascending towards gamma
    let minus_base = vertices.len();
    for ix in 0..=nx_minus {
        let x =
            geometry.bulk_minus.x0 + geometry.bulk_minus.width() * (ix as f64) / (nx_minus as f64);
        for iy in 0..=ny {
            vertices.push([x, station_y(iy)]);
            vertex_region.push(Subdomain::Minus);
        }
    }
    // fracture strip, s-slices ascending (reference layers mapped per column)
    let frac_base = vertices.len();
    for j in 0..=n_layers {
        let t = (j as f64) / (n_layers as f64);
        for i in 0..=ny {
            let y = station_y(i);
            let am = geometry.aperture_minus.eval(y);
            let a = geometry.total_aperture(y);
            let s = -am + t * a;
            vertices.push([chart_offset + s, y]);
            vertex_region.push(Subdomain::Fracture);
        }
    }
    // plus block
    let plus_base = vertices.len();
    for ix in 0..=nx_plus {
        let x = geometry.bulk_plus.x0 + geometry.bulk_plus.width() * (ix as f64) / (nx_plus as f64);
        for iy in 0..=ny {
            vertices.push([x, station_y(iy)]);
            vertex_region.push(Subdomain::Plus);
        }
    }

    let mut mesh = FracturedMesh {
        geometry: geometry.clone(),
        vertices,
        vertex_region,
        triangles: Vec::new(),
        triangle_region: Vec::new(),
        facets: Vec::new(),
        pairing_plus: Vec::new(),
        pairing_minus: Vec::new(),
        columns: Vec::new(),
        gamma_dirichlet: (false, false),
        flow_dirichlet_vertices: Vec::new(),
        external_vertices: Vec::new(),
        chart_offset,
        ny,
        nx_plus,
        nx_minus,
        n_layers,
        plus_base,
        minus_base,
        frac_base,
    };

    // Triangulate the three grids. Both diagonal orientations keep the
    // per-triangle normal derivative in the strip equal to a single
    // column's 1D difference quotient; the minus block and the lower half
    // of the strip use the mirrored split so the mesh is symmetric under
    // x -> -x (for symmetric apertures and an even layer count).
    let add_cell = |mesh: &mut FracturedMesh,
                    region: Subdomain,
                    mirrored: bool,
                    v00: usize,
                    v10: usize,
                    v01: usize,
                    v11: usize| {
        if mirrored {
            mesh.triangles.push([v00, v10, v01]);
            mesh.triangles.push([v10, v11, v01]);
        } else {
            mesh.triangles.push([v00, v10, v11]);
            mesh.triangles.push([v00, v11, v01]);
        }
        mesh.triangle_region.push(region);
        mesh.triangle_region.push(region);
    };
    let add_grid = |mesh: &mut FracturedMesh,
                    nx: usize,
                    region: Subdomain,
                    at: &dyn Fn(usize, usize) -> usize,
                    mirror: &dyn Fn(usize) -> bool| {
        for ix in 0..nx {
            for iy in 0..ny {
                add_cell(
                    mesh,
                    region,
                    mirror(ix),
                    at(ix, iy),
                    at(ix + 1, iy),
                    at(ix, iy + 1),
                    at(ix + 1, iy + 1),
                );
            }
        }
    };
    {
        let m = &mut mesh;
        let base = minus_base;
        add_grid(
            m,
            nx_minus,
            Subdomain::Minus,
            &move |ix, iy| base + ix * (ny + 1) + iy,
            &|_| true,
        );
    }
    {
        let m = &mut mesh;
        let base = frac_base;
        add_grid(
            m,
            n_layers,
            Subdomain::Fracture,
            &move |ix, iy| base + ix * (ny + 1) + iy,
            &|ix| 2 * ix < n_layers,
        );
    }
    {
        let m = &mut mesh;
        let base = plus_base;
        add_grid(
            m,
            nx_plus,
            Subdomain::Plus,
            &move |ix, iy| base + ix * (ny + 1) + iy,
            &|_| false,
        );
    }

    for t in 0..mesh.triangles.len() {
        if mesh.triangle_area(t) <= 0.0 {
            return Err(Error::Mesh(format!("non-positive triangle area at {t}")));
        }
    }

    // external facets with flow tags
    let tag_of = |seg: BoundarySegment| match geometry.flow_bc(seg) {
        FlowBc::Dirichlet => FacetTag::DirichletFlow,
        FlowBc::Neumann => FacetTag::NeumannFlow,
    };
    {
        use BoundarySegment::*;
        // plus right, tops and bottoms
        for iy in 0..ny {
            mesh.facets.push((
                mesh.plus_vertex(nx_plus, iy),
                mesh.plus_vertex(nx_plus, iy + 1),
                tag_of(PlusRight),
            ));
            mesh.facets.push((
                mesh.minus_vertex(0, iy),
                mesh.minus_vertex(0, iy + 1),
                tag_of(MinusLeft),
            ));
        }
        for ix in 0..nx_plus {
            mesh.facets.push((
                mesh.plus_vertex(ix, ny),
                mesh.plus_vertex(ix + 1, ny),
                tag_of(PlusTop),
            ));
            mesh.facets.push((
                mesh.plus_vertex(ix, 0),
                mesh.plus_vertex(ix + 1, 0),
                tag_of(PlusBottom),
            ));
        }
        for ix in 0..nx_minus {
            mesh.facets.push((
                mesh.minus_vertex(ix, ny),
                mesh.minus_vertex(ix + 1, ny),
                tag_of(MinusTop),
            ));
            mesh.facets.push((
                mesh.minus_vertex(ix, 0),
                mesh.minus_vertex(ix + 1, 0),
                tag_of(MinusBottom),
            ));
        }
        for j in 0..n_layers {
            mesh.facets.push((
                mesh.frac_vertex(j, ny),
                mesh.frac_vertex(j + 1, ny),
                tag_of(FracTop),
            ));
            mesh.facets.push((
                mesh.frac_vertex(j, 0),
                mesh.frac_vertex(j + 1, 0),
                tag_of(FracBottom),
            ));
        }
        // gamma internal facets
        for iy in 0..ny {
            mesh.facets.push((
                mesh.gamma_plus_vertex(iy),
                mesh.gamma_plus_vertex(iy + 1),
                FacetTag::GammaPlusSide,
            ));
            mesh.facets.push((
                mesh.gamma_minus_vertex(iy),
                mesh.gamma_minus_vertex(iy + 1),
                FacetTag::GammaMinusSide,
            ));
        }
    }

    // pairings and columns
    for i in 0..=ny {
        mesh.pairing_plus
            .push((mesh.frac_vertex(n_layers, i), mesh.gamma_plus_vertex(i)));
        mesh.pairing_minus
            .push((mesh.frac_vertex(0, i), mesh.gamma_minus_vertex(i)));
        let verts: Vec<usize> = (0..=n_layers).map(|j| mesh.frac_vertex(j, i)).collect();
        let seg_len: Vec<f64> = verts
            .windows(2)
            .map(|w| mesh.vertices[w[1]][0] - mesh.vertices[w[0]][0])
            .collect();
        mesh.columns.push(NormalColumn {
            station: i,
            y: station_y(i),
            vertices: verts,
            seg_len,
        });
    }

    // gamma endpoint Dirichlet tags: an endpoint is Dirichlet iff it lies in
    // the closure of a positive-length flow-Dirichlet fracture segment
    mesh.gamma_dirichlet = (
        geometry.flow_bc(BoundarySegment::FracBottom) == FlowBc::Dirichlet,
        geometry.flow_bc(BoundarySegment::FracTop) == FlowBc::Dirichlet,
    );

    // vertex masks
    let n_v = mesh.vertices.len();
    let mut flow_d = vec![false; n_v];
    let mut external = vec![false; n_v];
    for &(a, b, tag) in &mesh.facets {
        match tag {
            FacetTag::DirichletFlow => {
                flow_d[a] = true;
                flow_d[b] = true;
                external[a] = true;
                external[b] = true;
            }
            FacetTag::NeumannFlow => {
                external[a] = true;
                external[b] = true;
            }
            _ => {}
        }
    }
    mesh.flow_dirichlet_vertices = flow_d;
    mesh.external_vertices = external;

    // column-sum invariant
    for col in &mesh.columns {
        let total: f64 = col.seg_len.iter().sum();
        let a = geometry.total_aperture(col.y);
        if (total - a).abs() > 1e-12 {
            return Err(Error::Mesh(format!(
                "column at y = {} spans {} but a(y) = {}",
                col.y, total, a
            )));
        }
    }

    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aperture;

    #[test]
    fn structured_gamma_stations() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        let ys: Vec<f64> = (0..mesh.n_stations()).map(|i| mesh.station_y(i)).collect();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(ys.len(), 5);
        for (a, b) in ys.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_grows_by_factor_four() {
        let g = Geometry::default_unit();
        let a = build_mesh(&g, 1.0 / 8.0).unwrap().n_vertices() as f64;
        let b = build_mesh(&g, 1.0 / 16.0).unwrap().n_vertices() as f64;
        let ratio = b / a;
        assert!(ratio > 3.3 && ratio < 4.6, "ratio = {ratio}");
    }

    #[test]
    fn variable_aperture_columns_span_aperture() {
        let mut g = Geometry::default_unit();
        g.aperture_plus = Aperture::AffineY { a0: 0.5, ay: 0.25 };
        let mesh = build_mesh(&g, 1.0 / 8.0).unwrap();
        for col in &mesh.columns {
            let s_min = mesh.vertices[col.vertices[0]][0] - mesh.chart_offset;
            let s_max = mesh.vertices[*col.vertices.last().unwrap()][0] - mesh.chart_offset;
            assert!((s_min + 0.5).abs() < 1e-12);
            assert!((s_max - (0.5 + col.y / 4.0)).abs() < 1e-12);
            let total: f64 = col.seg_len.iter().sum();
            assert!((total - g.total_aperture(col.y)).abs() < 1e-12);
        }
    }

    #[test]
    fn subdomain_areas_match_analytic() {
        let mut g = Geometry::default_unit();
        g.aperture_plus = Aperture::AffineY { a0: 0.5, ay: 0.25 };
        let mesh = build_mesh(&g, 1.0 / 8.0).unwrap();
        let mut areas = [0.0f64; 3];
        for t in 0..mesh.n_triangles() {
            let k = match mesh.triangle_region[t] {
                Subdomain::Plus => 0,
                Subdomain::Minus => 1,
                Subdomain::Fracture => 2,
            };
            areas[k] += mesh.triangle_area(t);
        }
        assert!((areas[0] - 1.0).abs() < 1e-10);
        assert!((areas[1] - 1.0).abs() < 1e-10);
        // integral of a(y) = 1 + y/4 over (0,1) = 1 + 1/8
        assert!((areas[2] - 1.125).abs() < 1e-10);
    }

    #[test]
    fn locate_centroid_and_outside() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        let t = 7;
        let [a, b, c] = mesh.triangles[t];
        let cx = (mesh.vertices[a][0] + mesh.vertices[b][0] + mesh.vertices[c][0]) / 3.0;
        let cy = (mesh.vertices[a][1] + mesh.vertices[b][1] + mesh.vertices[c][1]) / 3.0;
        let (tid, bary) = mesh.locate(cx, cy).unwrap();
        assert_eq!(tid, t);
        for l in bary {
            assert!((l - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(mesh.locate(-5.0, 0.5).is_none());
        // shared-edge midpoint: barycentric coordinate of the opposite vertex is 0
        let mx = (mesh.vertices[a][0] + mesh.vertices[b][0]) / 2.0;
        let my = (mesh.vertices[a][1] + mesh.vertices[b][1]) / 2.0;
        let (_tid2, bary2) = mesh.locate(mx, my).unwrap();
        let min = bary2.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-12);
    }

    #[test]
    fn pairings_are_bijections_on_stations() {
        let mesh = build_mesh(&Geometry::default_unit(), 0.25).unwrap();
        assert_eq!(mesh.pairing_plus.len(), mesh.n_stations());
        for (f, b) in &mesh.pairing_plus {
            // paired vertices share the tangential coordinate
            assert!((mesh.vertices[*f][1] - mesh.vertices[*b][1]).abs() < 1e-15);
        }
        // each gamma vertex heads exactly one column
        let mut seen = vec![false; mesh.n_stations()];
        for col in &mesh.columns {
            assert!(!seen[col.station]);
            seen[col.station] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn nonpositive_h_rejected() {
        assert!(build_mesh(&Geometry::default_unit(), 0.0).is_err());
    }
}
