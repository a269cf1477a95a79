//! Material coefficient fields. Bulk and fracture coefficients are stored
//! per subdomain and evaluated in logical coordinates: (x, y) in the bulk
//! blocks, (s, y) in the rescaled strip with s the normal coordinate.

use crate::linalg::eig2_sym;
use crate::{Error, Result};
use std::sync::Arc;

/// Fourth-order elasticity tensor in 2D with full index access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elastic4 {
    pub c: [[[[f64; 2]; 2]; 2]; 2],
}

impl Elastic4 {
    pub fn zero() -> Self {
        Elastic4 {
            c: [[[[0.0; 2]; 2]; 2]; 2],
        }
    }

    /// Isotropic tensor with Lame parameters.
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut t = Elastic4::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t.c[i][j][k][l] = lambda * d(i, j) * d(k, l)
                            + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                    }
                }
            }
        }
        t
    }

    /// sigma = C : e
    pub fn apply(&self, e: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut s = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s[i][j] += self.c[i][j][k][l] * e[k][l];
                    }
                }
            }
        }
        s
    }

    /// C e_trial : e_test
    pub fn contract(&self, e_trial: [[f64; 2]; 2], e_test: [[f64; 2]; 2]) -> f64 {
        let s = self.apply(e_trial);
        let mut v = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                v += s[i][j] * e_test[i][j];
            }
        }
        v
    }

    /// Normal elasticity tensor (C^N)_{ik} = sum_{jl} C_{ijkl} N_j N_l.
    pub fn normal_tensor(&self, n: [f64; 2]) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        m[i][k] += self.c[i][j][k][l] * n[j] * n[l];
                    }
                }
            }
        }
        m
    }

    /// Smallest eigenvalue of the quadratic form M -> CM:M over unit
    /// symmetric M (basis m11, m22, sqrt(2) m12).
    pub fn ellipticity_constant(&self) -> f64 {
        let r2 = std::f64::consts::SQRT_2;
        let b = [
            [
                self.c[0][0][0][0],
                self.c[0][0][1][1],
                r2 * self.c[0][0][0][1],
            ],
            [
                self.c[1][1][0][0],
                self.c[1][1][1][1],
                r2 * self.c[1][1][0][1],
            ],
            [
                r2 * self.c[0][1][0][0],
                r2 * self.c[0][1][1][1],
                2.0 * self.c[0][1][0][1],
            ],
        ];
        // symmetric 3x3 eigenvalue via characteristic polynomial would be
        // overkill; reuse the dense inverse-iteration helper
        let flat: Vec<f64> = b.iter().flatten().cloned().collect();
        crate::linalg::min_eig_sym(3, &flat).unwrap_or(f64::NAN)
    }
}

pub type ScalarFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;
pub type ElasticFn = Arc<dyn Fn([f64; 2]) -> Elastic4 + Send + Sync>;

/// Scalar coefficient field on one subdomain, logical coordinates.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// a0 + ay * y
    AffineY {
        a0: f64,
        ay: f64,
    },
    /// piecewise constant in the normal coordinate (fracture fields)
    TwoLayerNormal {
        lower: f64,
        upper: f64,
        split: f64,
    },
    /// amplitude * (1 - |x|), clamped at zero (bulk tent profile)
    TentX {
        amplitude: f64,
    },
    Custom(ScalarFn),
}

impl ScalarField {
    pub fn eval(&self, p: [f64; 2], t: f64) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::AffineY { a0, ay } => a0 + ay * p[1],
            ScalarField::TwoLayerNormal {
                lower,
                upper,
                split,
            } => {
                if p[0] < *split {
                    *lower
                } else {
                    *upper
                }
            }
            ScalarField::TentX { amplitude } => amplitude * (1.0 - p[0].abs()).max(0.0),
            ScalarField::Custom(f) => f(p, t),
        }
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::AffineY { a0, ay } => write!(f, "AffineY({a0},{ay})"),
            ScalarField::TwoLayerNormal {
                lower,
                upper,
                split,
            } => {
                write!(f, "TwoLayerNormal({lower},{upper};{split})")
            }
            ScalarField::TentX { amplitude } => write!(f, "TentX({amplitude})"),
            ScalarField::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone)]
pub enum VectorField {
    Constant([f64; 2]),
    Custom(VectorFn),
}

impl VectorField {
    pub fn eval(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        match self {
            VectorField::Constant(v) => *v,
            VectorField::Custom(f) => f(p, t),
        }
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<vector field>")
    }
}

#[derive(Clone)]
pub enum MatrixField {
    Constant([[f64; 2]; 2]),
    TwoLayerNormal {
        lower: [[f64; 2]; 2],
        upper: [[f64; 2]; 2],
        split: f64,
    },
    Custom(MatrixFn),
}

impl MatrixField {
    pub fn eval(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            MatrixField::Constant(m) => *m,
            MatrixField::TwoLayerNormal {
                lower,
                upper,
                split,
            } => {
                if p[0] < *split {
                    *lower
                } else {
                    *upper
                }
            }
            MatrixField::Custom(f) => f(p),
        }
    }

    pub fn identity(scale: f64) -> Self {
        MatrixField::Constant([[scale, 0.0], [0.0, scale]])
    }
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<matrix field>")
    }
}

#[derive(Clone)]
pub enum ElasticField {
    Isotropic {
        lambda: f64,
        mu: f64,
    },
    TwoLayerIsotropic {
        lower: (f64, f64),
        upper: (f64, f64),
        split: f64,
    },
    Custom(ElasticFn),
}

impl ElasticField {
    pub fn eval(&self, p: [f64; 2]) -> Elastic4 {
        match self {
            ElasticField::Isotropic { lambda, mu } => Elastic4::isotropic(*lambda, *mu),
            ElasticField::TwoLayerIsotropic {
                lower,
                upper,
                split,
            } => {
                let (l, m) = if p[0] < *split { *lower } else { *upper };
                Elastic4::isotropic(l, m)
            }
            ElasticField::Custom(f) => f(p),
        }
    }
}

impl std::fmt::Debug for ElasticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<elastic field>")
    }
}

/// Smooth multiplicative time factor for the source terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    One,
    /// 1 + rate * t
    Ramp {
        rate: f64,
    },
    /// cos(omega * t)
    Cos {
        omega: f64,
    },
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFactor::One => 1.0,
            TimeFactor::Ramp { rate } => 1.0 + rate * t,
            TimeFactor::Cos { omega } => (omega * t).cos(),
        }
    }
}

/// All coefficient fields of one problem instance.
#[derive(Debug, Clone)]
pub struct MaterialFields {
    pub elast_plus: ElasticField,
    pub elast_minus: ElasticField,
    pub elast_frac: ElasticField,
    pub cond_plus: MatrixField,
    pub cond_minus: MatrixField,
    pub cond_frac: MatrixField,
    pub biot_plus: MatrixField,
    pub biot_minus: MatrixField,
    pub biot_frac: MatrixField,
    pub storage_plus: ScalarField,
    pub storage_minus: ScalarField,
    pub storage_frac: ScalarField,
    pub mech_source_plus: VectorField,
    pub mech_source_minus: VectorField,
    pub mech_source_frac: VectorField,
    pub mech_source_time: TimeFactor,
    pub flow_source_plus: ScalarField,
    pub flow_source_minus: ScalarField,
    pub flow_source_frac: ScalarField,
    pub flow_source_time: TimeFactor,
    pub p0_plus: ScalarField,
    pub p0_minus: ScalarField,
    pub p0_frac: ScalarField,
    pub gravity: [f64; 2],
}

impl MaterialFields {
    /// Unit coefficients, zero sources, zero initial pressure.
    pub fn unit() -> Self {
        MaterialFields {
            elast_plus: ElasticField::Isotropic {
                lambda: 1.0,
                mu: 1.0,
            },
            elast_minus: ElasticField::Isotropic {
                lambda: 1.0,
                mu: 1.0,
            },
            elast_frac: ElasticField::Isotropic {
                lambda: 1.0,
                mu: 1.0,
            },
            cond_plus: MatrixField::identity(1.0),
            cond_minus: MatrixField::identity(1.0),
            cond_frac: MatrixField::identity(1.0),
            biot_plus: MatrixField::identity(0.4),
            biot_minus: MatrixField::identity(0.4),
            biot_frac: MatrixField::identity(0.3),
            storage_plus: ScalarField::Constant(1.0),
            storage_minus: ScalarField::Constant(1.0),
            storage_frac: ScalarField::Constant(1.0),
            mech_source_plus: VectorField::Constant([0.0, 0.0]),
            mech_source_minus: VectorField::Constant([0.0, 0.0]),
            mech_source_frac: VectorField::Constant([0.0, 0.0]),
            mech_source_time: TimeFactor::One,
            flow_source_plus: ScalarField::Constant(0.0),
            flow_source_minus: ScalarField::Constant(0.0),
            flow_source_frac: ScalarField::Constant(0.0),
            flow_source_time: TimeFactor::One,
            p0_plus: ScalarField::Constant(0.0),
            p0_minus: ScalarField::Constant(0.0),
            p0_frac: ScalarField::Constant(0.0),
            gravity: [0.0, 0.0],
        }
    }

    /// Default regime-study data: nonzero sources in bulk and fracture with
    /// tangential structure in the fracture source, a weakly conductive
    /// fracture so the asymptotic regimes are visible inside the sweep
    /// window, and a tent initial pressure head that is constant inside the
    /// strip.
    pub fn default_study() -> Self {
        let mut m = MaterialFields::unit();
        m.cond_frac = MatrixField::identity(0.1);
        m.mech_source_plus = VectorField::Constant([0.2, 0.0]);
        m.mech_source_minus = VectorField::Constant([0.2, 0.0]);
        m.mech_source_frac = VectorField::Constant([0.3, 0.1]);
        m.flow_source_plus = ScalarField::Constant(0.5);
        m.flow_source_minus = ScalarField::Constant(0.5);
        m.flow_source_frac = ScalarField::AffineY { a0: 0.3, ay: 0.6 };
        m.flow_source_time = TimeFactor::Cos { omega: 2.0 };
        m.p0_plus = ScalarField::TentX { amplitude: 0.5 };
        m.p0_minus = ScalarField::TentX { amplitude: 0.5 };
        m.p0_frac = ScalarField::Constant(0.5);
        m
    }

    pub fn elasticity(&self, r: crate::mesh::Subdomain) -> &ElasticField {
        match r {
            crate::mesh::Subdomain::Plus => &self.elast_plus,
            crate::mesh::Subdomain::Minus => &self.elast_minus,
            crate::mesh::Subdomain::Fracture => &self.elast_frac,
        }
    }
    pub fn conductivity(&self, r: crate::mesh::Subdomain) -> &MatrixField {
        match r {
            crate::mesh::Subdomain::Plus => &self.cond_plus,
            crate::mesh::Subdomain::Minus => &self.cond_minus,
            crate::mesh::Subdomain::Fracture => &self.cond_frac,
        }
    }
    pub fn biot(&self, r: crate::mesh::Subdomain) -> &MatrixField {
        match r {
            crate::mesh::Subdomain::Plus => &self.biot_plus,
            crate::mesh::Subdomain::Minus => &self.biot_minus,
            crate::mesh::Subdomain::Fracture => &self.biot_frac,
        }
    }
    pub fn storage(&self, r: crate::mesh::Subdomain) -> &ScalarField {
        match r {
            crate::mesh::Subdomain::Plus => &self.storage_plus,
            crate::mesh::Subdomain::Minus => &self.storage_minus,
            crate::mesh::Subdomain::Fracture => &self.storage_frac,
        }
    }
    pub fn mech_source(&self, r: crate::mesh::Subdomain) -> &VectorField {
        match r {
            crate::mesh::Subdomain::Plus => &self.mech_source_plus,
            crate::mesh::Subdomain::Minus => &self.mech_source_minus,
            crate::mesh::Subdomain::Fracture => &self.mech_source_frac,
        }
    }
    pub fn flow_source(&self, r: crate::mesh::Subdomain) -> &ScalarField {
        match r {
            crate::mesh::Subdomain::Plus => &self.flow_source_plus,
            crate::mesh::Subdomain::Minus => &self.flow_source_minus,
            crate::mesh::Subdomain::Fracture => &self.flow_source_frac,
        }
    }
    pub fn initial_pressure(&self, r: crate::mesh::Subdomain) -> &ScalarField {
        match r {
            crate::mesh::Subdomain::Plus => &self.p0_plus,
            crate::mesh::Subdomain::Minus => &self.p0_minus,
            crate::mesh::Subdomain::Fracture => &self.p0_frac,
        }
    }

    /// Gravity potential in logical coordinates: G(x) = x . g in the bulk;
    /// in the strip the normal coordinate contributes eps * s.
    pub fn gravity_potential(&self, r: crate::mesh::Subdomain, p: [f64; 2], eps: f64) -> f64 {
        match r {
            crate::mesh::Subdomain::Fracture => {
                eps * p[0] * self.gravity[0] + p[1] * self.gravity[1]
            }
            crate::mesh::Subdomain::Plus => {
                (p[0] + eps / 2.0) * self.gravity[0] + p[1] * self.gravity[1]
            }
            crate::mesh::Subdomain::Minus => {
                (p[0] - eps / 2.0) * self.gravity[0] + p[1] * self.gravity[1]
            }
        }
    }

    /// Checks the structural coefficient assumptions at sample points: SPD
    /// conductivity, elliptic elasticity, positive storage, symmetric Biot
    /// tensor with the fracture tensor block-diagonal (the normal is an
    /// eigenvector, no normal-tangential cross coupling).
    pub fn validate(&self, mesh: &crate::mesh::FracturedMesh) -> Result<()> {
        for t in 0..mesh.n_triangles() {
            let [a, b, c] = mesh.triangles[t];
            let r = mesh.triangle_region[t];
            let centroid = {
                let (_, pa) = mesh.logical_coords(a);
                let (_, pb) = mesh.logical_coords(b);
                let (_, pc) = mesh.logical_coords(c);
                [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
            };
            let k = self.conductivity(r).eval(centroid);
            if (k[0][1] - k[1][0]).abs() > 1e-12 || eig2_sym(k)[0] <= 0.0 {
                return Err(Error::Materials(format!(
                    "conductivity must be symmetric positive definite ({:?} at {:?})",
                    r, centroid
                )));
            }
            let al = self.biot(r).eval(centroid);
            if (al[0][1] - al[1][0]).abs() > 1e-12 {
                return Err(Error::Materials("Biot tensor must be symmetric".into()));
            }
            if r == crate::mesh::Subdomain::Fracture && al[0][1].abs() > 1e-14 {
                return Err(Error::Materials(
                    "fracture Biot tensor must be block-diagonal (no normal-tangential coupling)"
                        .into(),
                ));
            }
            if self.storage(r).eval(centroid, 0.0) <= 0.0 {
                return Err(Error::Materials(
                    "storage coefficient must be positive".into(),
                ));
            }
            let e4 = self.elasticity(r).eval(centroid);
            let cn = e4.normal_tensor([1.0, 0.0]);
            if eig2_sym(cn)[0] <= 0.0 {
                return Err(Error::Materials(
                    "elasticity normal tensor not positive definite".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_normal_tensor_is_diag() {
        // C_f^N = diag(lambda + 2 mu, mu) for N = e1
        let c = Elastic4::isotropic(2.0, 3.0);
        let m = c.normal_tensor([1.0, 0.0]);
        assert!((m[0][0] - 8.0).abs() < 1e-14);
        assert!((m[1][1] - 3.0).abs() < 1e-14);
        assert!(m[0][1].abs() < 1e-14 && m[1][0].abs() < 1e-14);
    }

    #[test]
    fn isotropic_contract_matches_closed_form() {
        let c = Elastic4::isotropic(1.5, 0.7);
        let e = [[0.2, 0.1], [0.1, -0.3]];
        // C e : e = lambda tr(e)^2 + 2 mu e:e
        let tr = e[0][0] + e[1][1];
        let ee = e.iter().flatten().map(|v| v * v).sum::<f64>();
        let expect = 1.5 * tr * tr + 2.0 * 0.7 * ee;
        assert!((c.contract(e, e) - expect).abs() < 1e-14);
    }

    #[test]
    fn ellipticity_constant_isotropic() {
        // eigenvalues of the isotropic Voigt form: 2 mu and 2(lambda + mu)
        let c = Elastic4::isotropic(1.0, 0.5);
        let e = c.ellipticity_constant();
        assert!((e - 1.0).abs() < 1e-7, "e = {e}");
    }
}
