//! JSON run configuration: geometry, exact-rational exponents, coefficient
//! specs, and discretization. Exponents are parsed as "p/q" strings so the
//! equality-based regime switches stay exact.

use crate::exponents::{Ratio, ScalingExponents};
use crate::full_solver::BiotRunConfig;
use crate::geometry::{Aperture, BoundarySegment, FlowBc, Geometry, Rect};
use crate::materials::{
    ElasticField, MaterialFields, MatrixField, ScalarField, TimeFactor, VectorField,
};
use crate::study::SweepConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub exponents: ExponentsConfig,
    #[serde(default)]
    pub materials: MaterialsConfig,
    pub discretization: Discretization,
    /// eps for solve-full
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// sweep eps values, strictly decreasing
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub prefer_reduced: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_bulk_plus")]
    pub bulk_plus: Rect,
    #[serde(default = "default_bulk_minus")]
    pub bulk_minus: Rect,
    #[serde(default = "default_aperture")]
    pub aperture_plus: Aperture,
    #[serde(default = "default_aperture")]
    pub aperture_minus: Aperture,
    /// segments carrying flow-Dirichlet conditions; the rest are Neumann
    #[serde(default = "default_dirichlet")]
    pub flow_dirichlet: Vec<BoundarySegment>,
}

fn default_bulk_plus() -> Rect {
    Rect {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    }
}
fn default_bulk_minus() -> Rect {
    Rect {
        x0: -1.0,
        x1: 0.0,
        y0: 0.0,
        y1: 1.0,
    }
}
fn default_aperture() -> Aperture {
    Aperture::Constant(0.5)
}
fn default_dirichlet() -> Vec<BoundarySegment> {
    vec![BoundarySegment::PlusRight, BoundarySegment::MinusLeft]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsConfig {
    pub nu_c: Ratio,
    pub nu_k: Ratio,
    pub nu_omega: Ratio,
    pub nu_alpha_par: Ratio,
    pub nu_alpha_perp: Ratio,
    pub nu_f: Ratio,
    pub nu_q: Ratio,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
}

/// Scalar coefficient spec (named built-ins only; no expression parser).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarSpec {
    Constant { value: f64 },
    AffineY { a0: f64, ay: f64 },
    TwoLayerNormal { lower: f64, upper: f64, split: f64 },
    TentX { amplitude: f64 },
}

impl ScalarSpec {
    fn to_field(&self) -> ScalarField {
        match *self {
            ScalarSpec::Constant { value } => ScalarField::Constant(value),
            ScalarSpec::AffineY { a0, ay } => ScalarField::AffineY { a0, ay },
            ScalarSpec::TwoLayerNormal {
                lower,
                upper,
                split,
            } => ScalarField::TwoLayerNormal {
                lower,
                upper,
                split,
            },
            ScalarSpec::TentX { amplitude } => ScalarField::TentX { amplitude },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    Constant {
        xx: f64,
        xy: f64,
        yy: f64,
    },
    TwoLayerNormal {
        lower: [f64; 3],
        upper: [f64; 3],
        split: f64,
    },
}

impl MatrixSpec {
    fn to_field(&self) -> MatrixField {
        match *self {
            MatrixSpec::Constant { xx, xy, yy } => MatrixField::Constant([[xx, xy], [xy, yy]]),
            MatrixSpec::TwoLayerNormal {
                lower,
                upper,
                split,
            } => MatrixField::TwoLayerNormal {
                lower: [[lower[0], lower[1]], [lower[1], lower[2]]],
                upper: [[upper[0], upper[1]], [upper[1], upper[2]]],
                split,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElasticSpec {
    Isotropic {
        lambda: f64,
        mu: f64,
    },
    TwoLayerIsotropic {
        lower: [f64; 2],
        upper: [f64; 2],
        split: f64,
    },
}

impl ElasticSpec {
    fn to_field(&self) -> ElasticField {
        match *self {
            ElasticSpec::Isotropic { lambda, mu } => ElasticField::Isotropic { lambda, mu },
            ElasticSpec::TwoLayerIsotropic {
                lower,
                upper,
                split,
            } => ElasticField::TwoLayerIsotropic {
                lower: (lower[0], lower[1]),
                upper: (upper[0], upper[1]),
                split,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSpec {
    One,
    Ramp { rate: f64 },
    Cos { omega: f64 },
}

impl TimeSpec {
    fn to_factor(&self) -> TimeFactor {
        match *self {
            TimeSpec::One => TimeFactor::One,
            TimeSpec::Ramp { rate } => TimeFactor::Ramp { rate },
            TimeSpec::Cos { omega } => TimeFactor::Cos { omega },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionCoeffs {
    pub elasticity: ElasticSpec,
    pub conductivity: MatrixSpec,
    pub biot: MatrixSpec,
    pub storage: ScalarSpec,
}

impl Default for RegionCoeffs {
    fn default() -> Self {
        RegionCoeffs {
            elasticity: ElasticSpec::Isotropic {
                lambda: 1.0,
                mu: 1.0,
            },
            conductivity: MatrixSpec::Constant {
                xx: 1.0,
                xy: 0.0,
                yy: 1.0,
            },
            biot: MatrixSpec::Constant {
                xx: 0.3,
                xy: 0.0,
                yy: 0.3,
            },
            storage: ScalarSpec::Constant { value: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    #[serde(default)]
    pub bulk_plus: RegionCoeffs,
    #[serde(default)]
    pub bulk_minus: RegionCoeffs,
    #[serde(default)]
    pub fracture: RegionCoeffs,
    #[serde(default = "default_flow_source")]
    pub flow_source: [ScalarSpec; 3],
    #[serde(default = "default_time_spec")]
    pub flow_source_time: TimeSpec,
    #[serde(default = "default_mech_source")]
    pub mech_source: [[f64; 2]; 3],
    #[serde(default = "default_time_spec")]
    pub mech_source_time: TimeSpec,
    #[serde(default = "default_p0")]
    pub initial_pressure: [ScalarSpec; 3],
    #[serde(default)]
    pub gravity: [f64; 2],
}

fn default_flow_source() -> [ScalarSpec; 3] {
    [
        ScalarSpec::Constant { value: 0.5 },
        ScalarSpec::Constant { value: 0.5 },
        ScalarSpec::AffineY { a0: 0.3, ay: 0.6 },
    ]
}
fn default_mech_source() -> [[f64; 2]; 3] {
    [[0.2, 0.0], [0.2, 0.0], [0.3, 0.1]]
}
fn default_p0() -> [ScalarSpec; 3] {
    [
        ScalarSpec::TentX { amplitude: 0.5 },
        ScalarSpec::TentX { amplitude: 0.5 },
        ScalarSpec::Constant { value: 0.5 },
    ]
}
fn default_time_spec() -> TimeSpec {
    TimeSpec::Cos { omega: 2.0 }
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        MaterialsConfig {
            bulk_plus: RegionCoeffs::default(),
            bulk_minus: RegionCoeffs::default(),
            fracture: RegionCoeffs::default(),
            flow_source: default_flow_source(),
            flow_source_time: default_time_spec(),
            mech_source: default_mech_source(),
            mech_source_time: TimeSpec::One,
            initial_pressure: default_p0(),
            gravity: [0.0, 0.0],
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Geometry {
        use crate::geometry::ALL_SEGMENTS;
        let boundary = ALL_SEGMENTS
            .iter()
            .map(|s| {
                let bc = if self.geometry.flow_dirichlet.contains(s) {
                    FlowBc::Dirichlet
                } else {
                    FlowBc::Neumann
                };
                (*s, bc)
            })
            .collect();
        Geometry {
            bulk_plus: self.geometry.bulk_plus,
            bulk_minus: self.geometry.bulk_minus,
            aperture_plus: self.geometry.aperture_plus.clone(),
            aperture_minus: self.geometry.aperture_minus.clone(),
            boundary,
        }
    }

    pub fn exponents(&self) -> ScalingExponents {
        let e = &self.exponents;
        ScalingExponents::new(
            e.nu_c,
            e.nu_k,
            e.nu_omega,
            e.nu_alpha_par,
            e.nu_alpha_perp,
            e.nu_f,
            e.nu_q,
        )
    }

    pub fn materials(&self) -> MaterialFields {
        let m = &self.materials;
        MaterialFields {
            elast_plus: m.bulk_plus.elasticity.to_field(),
            elast_minus: m.bulk_minus.elasticity.to_field(),
            elast_frac: m.fracture.elasticity.to_field(),
            cond_plus: m.bulk_plus.conductivity.to_field(),
            cond_minus: m.bulk_minus.conductivity.to_field(),
            cond_frac: m.fracture.conductivity.to_field(),
            biot_plus: m.bulk_plus.biot.to_field(),
            biot_minus: m.bulk_minus.biot.to_field(),
            biot_frac: m.fracture.biot.to_field(),
            storage_plus: m.bulk_plus.storage.to_field(),
            storage_minus: m.bulk_minus.storage.to_field(),
            storage_frac: m.fracture.storage.to_field(),
            mech_source_plus: VectorField::Constant(m.mech_source[0]),
            mech_source_minus: VectorField::Constant(m.mech_source[1]),
            mech_source_frac: VectorField::Constant(m.mech_source[2]),
            mech_source_time: m.mech_source_time.to_factor(),
            flow_source_plus: m.flow_source[0].to_field(),
            flow_source_minus: m.flow_source[1].to_field(),
            flow_source_frac: m.flow_source[2].to_field(),
            flow_source_time: m.flow_source_time.to_factor(),
            p0_plus: m.initial_pressure[0].to_field(),
            p0_minus: m.initial_pressure[1].to_field(),
            p0_frac: m.initial_pressure[2].to_field(),
            gravity: m.gravity,
        }
    }

    pub fn biot_run(&self) -> Result<BiotRunConfig> {
        let eps = self
            .epsilon
            .ok_or_else(|| Error::Config("solve-full needs 'epsilon'".into()))?;
        let mut cfg = BiotRunConfig::new(self.geometry(), self.exponents(), eps);
        cfg.materials = self.materials();
        cfg.t_end = self.discretization.t_end;
        cfg.dt = self.discretization.dt;
        Ok(cfg)
    }

    pub fn sweep(&self) -> SweepConfig {
        let mut cfg = SweepConfig::new(self.exponents());
        cfg.geometry = self.geometry();
        cfg.materials = self.materials();
        cfg.h = self.discretization.h;
        cfg.dt = self.discretization.dt;
        cfg.t_end = self.discretization.t_end;
        if let Some(list) = &self.eps_list {
            cfg.eps_list = list.clone();
        }
        cfg
    }

    /// Minimal default configuration for a regime.
    pub fn example(nu_c: &str, nu_k: &str) -> Self {
        RunConfig {
            geometry: GeometryConfig {
                bulk_plus: default_bulk_plus(),
                bulk_minus: default_bulk_minus(),
                aperture_plus: default_aperture(),
                aperture_minus: default_aperture(),
                flow_dirichlet: default_dirichlet(),
            },
            exponents: ExponentsConfig {
                nu_c: nu_c.parse().unwrap(),
                nu_k: nu_k.parse().unwrap(),
                nu_omega: "-1".parse().unwrap(),
                nu_alpha_par: "0".parse().unwrap(),
                nu_alpha_perp: "0".parse().unwrap(),
                nu_f: "-1".parse().unwrap(),
                nu_q: "-1".parse().unwrap(),
            },
            materials: MaterialsConfig::default(),
            discretization: Discretization {
                h: 1.0 / 16.0,
                dt: 1.0 / 20.0,
                t_end: 0.5,
            },
            epsilon: Some(0.5),
            eps_list: Some(vec![0.5, 0.25, 0.125, 0.0625]),
            prefer_reduced: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_round_trips() {
        let cfg = RunConfig::example("1", "-1");
        let json = cfg.to_json();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        assert_eq!(back.exponents().nu_k, Ratio::int(-1));
    }

    #[test]
    fn rational_strings_parse_exactly() {
        let mut cfg = RunConfig::example("1", "-1");
        cfg.exponents.nu_alpha_perp = "1/2".parse().unwrap();
        let json = cfg.to_json();
        assert!(json.contains("\"1/2\""));
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(back.exponents.nu_alpha_perp, Ratio::new(1, 2));
    }

    #[test]
    fn bad_exponent_rejected() {
        let cfg = RunConfig::example("1", "-1");
        let json = cfg.to_json().replace("\"-1\"", "\"not-a-number\"");
        assert!(RunConfig::from_json(&json).is_err());
    }

    #[test]
    fn geometry_boundary_mapping() {
        let cfg = RunConfig::example("1", "2");
        let g = cfg.geometry();
        assert_eq!(g.flow_bc(BoundarySegment::PlusRight), FlowBc::Dirichlet);
        assert_eq!(g.flow_bc(BoundarySegment::PlusTop), FlowBc::Neumann);
    }
}
