//! Transformed geometry: two bulk rectangles abutting the vertical
//! interface gamma = {0} x (0,1), plus aperture functions describing the
//! rescaled fracture strip.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 - 1e-14 && x <= self.x1 + 1e-14 && y >= self.y0 - 1e-14 && y <= self.y1 + 1e-14
    }
}

/// Piecewise-linear aperture profile in the tangential coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Aperture {
    Constant(f64),
    /// a(y) = a0 + ay * y
    AffineY {
        a0: f64,
        ay: f64,
    },
    /// breakpoints (y, value), piecewise linear, y strictly increasing
    Table(Vec<(f64, f64)>),
}

impl Aperture {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Aperture::Constant(c) => *c,
            Aperture::AffineY { a0, ay } => a0 + ay * y,
            Aperture::Table(pts) => {
                if pts.is_empty() {
                    return 0.0;
                }
                if y <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    if y <= w[1].0 {
                        let t = (y - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + t * (w[1].1 - w[0].1);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }
}

/// External boundary segments of the transformed geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySegment {
    PlusRight,
    PlusTop,
    PlusBottom,
    MinusLeft,
    MinusTop,
    MinusBottom,
    FracTop,
    FracBottom,
}

pub const ALL_SEGMENTS: [BoundarySegment; 8] = [
    BoundarySegment::PlusRight,
    BoundarySegment::PlusTop,
    BoundarySegment::PlusBottom,
    BoundarySegment::MinusLeft,
    BoundarySegment::MinusTop,
    BoundarySegment::MinusBottom,
    BoundarySegment::FracTop,
    BoundarySegment::FracBottom,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowBc {
    Dirichlet,
    Neumann,
}

/// The fixed transformed geometry. Displacement is zero on every external
/// boundary; the flow condition per segment is configurable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Geometry {
    pub bulk_plus: Rect,
    pub bulk_minus: Rect,
    pub aperture_plus: Aperture,
    pub aperture_minus: Aperture,
    /// flow boundary condition per external segment
    pub boundary: Vec<(BoundarySegment, FlowBc)>,
}

impl Geometry {
    /// Unit bulk squares, constant apertures 1/2, flow-Dirichlet on the two
    /// outer vertical boundaries and Neumann elsewhere.
    pub fn default_unit() -> Self {
        use BoundarySegment::*;
        Geometry {
            bulk_plus: Rect {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            },
            bulk_minus: Rect {
                x0: -1.0,
                x1: 0.0,
                y0: 0.0,
                y1: 1.0,
            },
            aperture_plus: Aperture::Constant(0.5),
            aperture_minus: Aperture::Constant(0.5),
            boundary: vec![
                (PlusRight, FlowBc::Dirichlet),
                (PlusTop, FlowBc::Neumann),
                (PlusBottom, FlowBc::Neumann),
                (MinusLeft, FlowBc::Dirichlet),
                (MinusTop, FlowBc::Neumann),
                (MinusBottom, FlowBc::Neumann),
                (FracTop, FlowBc::Neumann),
                (FracBottom, FlowBc::Neumann),
            ],
        }
    }

    pub fn flow_bc(&self, seg: BoundarySegment) -> FlowBc {
        self.boundary
            .iter()
            .find(|(s, _)| *s == seg)
            .map(|(_, bc)| *bc)
            .unwrap_or(FlowBc::Neumann)
    }

    /// gamma is the segment {0} x (y0, y1) shared by both bulk rectangles.
    pub fn gamma_range(&self) -> (f64, f64) {
        (self.bulk_plus.y0, self.bulk_plus.y1)
    }

    pub fn total_aperture(&self, y: f64) -> f64 {
        self.aperture_plus.eval(y) + self.aperture_minus.eval(y)
    }

    /// True if at least one bulk side carries a flow-Dirichlet segment.
    pub fn has_dirichlet_side(&self, plus: bool) -> bool {
        use BoundarySegment::*;
        let segs: [BoundarySegment; 3] = if plus {
            [PlusRight, PlusTop, PlusBottom]
        } else {
            [MinusLeft, MinusTop, MinusBottom]
        };
        segs.iter().any(|s| self.flow_bc(*s) == FlowBc::Dirichlet)
    }

    /// True if the fracture's external boundary carries a flow-Dirichlet tag
    /// (then the admissible constant space W is {0}).
    pub fn fracture_has_dirichlet(&self) -> bool {
        self.flow_bc(BoundarySegment::FracTop) == FlowBc::Dirichlet
            || self.flow_bc(BoundarySegment::FracBottom) == FlowBc::Dirichlet
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.bulk_plus.width() <= 0.0
            || self.bulk_plus.height() <= 0.0
            || self.bulk_minus.width() <= 0.0
            || self.bulk_minus.height() <= 0.0
        {
            return Err(Error::Geometry(
                "bulk rectangles must have positive extent".into(),
            ));
        }
        if self.bulk_plus.x0.abs() > 1e-14 || self.bulk_minus.x1.abs() > 1e-14 {
            return Err(Error::Geometry(
                "bulk rectangles must abut gamma = {0} x (0,1): plus.x0 = 0 and minus.x1 = 0"
                    .into(),
            ));
        }
        if (self.bulk_plus.y0 - self.bulk_minus.y0).abs() > 1e-14
            || (self.bulk_plus.y1 - self.bulk_minus.y1).abs() > 1e-14
        {
            return Err(Error::Geometry(
                "bulk rectangles must share the gamma extent".into(),
            ));
        }
        let (g0, g1) = self.gamma_range();
        for k in 0..=n_samples {
            let y = g0 + (g1 - g0) * (k as f64) / (n_samples as f64);
            if self.total_aperture(y) <= 0.0 {
                return Err(Error::Geometry(format!(
                    "degenerate aperture: a(y) <= 0 at y = {y}"
                )));
            }
        }
        Ok(())
    }
}
