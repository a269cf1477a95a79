//! Scaling exponents of the fracture coefficients, regime classification,
//! and the admissibility checks they must satisfy.
//!
//! The regime switches are equality case splits that are discontinuous in
//! the exponents, so exponents are exact rationals and every comparison is
//! exact.

use crate::geometry::Geometry;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Exact rational number with a small normalized representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ratio {
    num: i64,
    den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Ratio {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(n: i64) -> Self {
        Ratio { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }
    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn mul2(&self) -> Ratio {
        Ratio::new(2 * self.num, self.den)
    }

    pub fn add_int(&self, k: i64) -> Ratio {
        Ratio::new(self.num + k * self.den, self.den)
    }

    pub fn sub(&self, other: Ratio) -> Ratio {
        Ratio::new(
            self.num * other.den - other.num * self.den,
            self.den * other.den,
        )
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_int = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("invalid rational '{s}'")))
        };
        if let Some((a, b)) = s.split_once('/') {
            let num = parse_int(a)?;
            let den = parse_int(b)?;
            if den == 0 {
                return Err(Error::Config(format!(
                    "invalid rational '{s}': zero denominator"
                )));
            }
            Ok(Ratio::new(num, den))
        } else {
            Ok(Ratio::int(parse_int(s)?))
        }
    }
}

impl TryFrom<String> for Ratio {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ratio> for String {
    fn from(r: Ratio) -> String {
        r.to_string()
    }
}

/// The seven exponents governing how the fracture coefficients scale with
/// the width-to-length ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub nu_c: Ratio,
    pub nu_k: Ratio,
    pub nu_omega: Ratio,
    pub nu_alpha_par: Ratio,
    pub nu_alpha_perp: Ratio,
    pub nu_f: Ratio,
    pub nu_q: Ratio,
}

impl ScalingExponents {
    pub fn new(
        nu_c: Ratio,
        nu_k: Ratio,
        nu_omega: Ratio,
        nu_alpha_par: Ratio,
        nu_alpha_perp: Ratio,
        nu_f: Ratio,
        nu_q: Ratio,
    ) -> Self {
        ScalingExponents {
            nu_c,
            nu_k,
            nu_omega,
            nu_alpha_par,
            nu_alpha_perp,
            nu_f,
            nu_q,
        }
    }

    /// All coupling-active secondary exponents for a given (nu_C, nu_K):
    /// storage, Biot coupling, and both sources switched on.
    pub fn coupling_active(nu_c: Ratio, nu_k: Ratio) -> Self {
        ScalingExponents {
            nu_c,
            nu_k,
            nu_omega: Ratio::int(-1),
            // 2 nu_alpha = nu_C - 1 for both directions
            nu_alpha_par: Ratio::new(nu_c.num() - nu_c.den(), 2 * nu_c.den()),
            nu_alpha_perp: Ratio::new(nu_c.num() - nu_c.den(), 2 * nu_c.den()),
            // 2 nu_f = nu_C - 3
            nu_f: Ratio::new(nu_c.num() - 3 * nu_c.den(), 2 * nu_c.den()),
            nu_q: Ratio::int(-1),
        }
    }

    /// iota(nu) = (nu + 1) / 2 as f64
    pub fn iota(nu: Ratio) -> f64 {
        (nu.to_f64() + 1.0) / 2.0
    }

    /// theta(nu) = max(0, (nu - 1)/2) as f64
    pub fn theta(nu: Ratio) -> f64 {
        ((nu.to_f64() - 1.0) / 2.0).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowRegime {
    /// nu_K < -1: instantaneously equalized constant fracture pressure
    IdealConduit,
    /// nu_K = -1: tangential PDE on gamma
    Conduit,
    /// -1 < nu_K < 1: fracture conductivity drops out
    Neutral,
    /// nu_K = 1: normal ODE through the fracture, pressure jump
    Barrier,
    /// nu_K > 1: no flow across gamma
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechRegime {
    /// nu_C = 1
    Soft,
    /// nu_C > 1
    VerySoft,
}

/// Classified regime with the flags controlling which terms survive in the
/// limit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeDescriptor {
    pub flow: FlowRegime,
    pub mech: MechRegime,
    pub storage_present: bool,
    pub biot_coupled: bool,
    pub flow_source_present: bool,
    pub mech_source_present: bool,
    /// true when the admissible constant space W is {0}
    pub w_is_zero: bool,
}

/// Checks all seven admissibility clauses plus the implemented-regime
/// restriction and classifies the regime.
pub fn validate_exponents(exp: &ScalingExponents, geometry: &Geometry) -> Result<RegimeDescriptor> {
    let m1 = Ratio::int(-1);
    let one = Ratio::int(1);

    // (i) nu_omega >= -1
    if exp.nu_omega < m1 {
        return Err(Error::ScalingAssumption(format!(
            "3.5(i): nu_omega >= -1 required, got {}",
            exp.nu_omega
        )));
    }
    // (ii), (iii): nu_C, nu_K real - nothing to check beyond representation.
    // (iv) 2 nu_q >= nu_omega - 1  or  (2 nu_q >= nu_K - 3 and nu_q >= -1)
    let iv_a = exp.nu_q.mul2() >= exp.nu_omega.add_int(-1);
    let iv_b = exp.nu_q.mul2() >= exp.nu_k.add_int(-3) && exp.nu_q >= m1;
    if !(iv_a || iv_b) {
        return Err(Error::ScalingAssumption(format!(
            "3.5(iv): need 2 nu_q >= nu_omega - 1 or (2 nu_q >= nu_K - 3 and nu_q >= -1), got nu_q = {}",
            exp.nu_q
        )));
    }
    // (v) 2 nu_f >= nu_C - 3 and nu_f >= -1
    if !(exp.nu_f.mul2() >= exp.nu_c.add_int(-3) && exp.nu_f >= m1) {
        return Err(Error::ScalingAssumption(format!(
            "3.5(v): need 2 nu_f >= nu_C - 3 and nu_f >= -1, got nu_f = {}",
            exp.nu_f
        )));
    }
    // (vi) 2 nu_alpha >= max(nu_C, 0) - 1, both directions
    let bound = if exp.nu_c > Ratio::int(0) {
        exp.nu_c.add_int(-1)
    } else {
        m1
    };
    if exp.nu_alpha_par.mul2() < bound {
        return Err(Error::ScalingAssumption(format!(
            "3.5(vi): need 2 nu_alpha_par >= max(nu_C, 0) - 1, got {}",
            exp.nu_alpha_par
        )));
    }
    if exp.nu_alpha_perp.mul2() < bound {
        return Err(Error::ScalingAssumption(format!(
            "3.5(vi): need 2 nu_alpha_perp >= max(nu_C, 0) - 1, got {}",
            exp.nu_alpha_perp
        )));
    }
    // (vii) Dirichlet-side requirement
    let plus_d = geometry.has_dirichlet_side(true);
    let minus_d = geometry.has_dirichlet_side(false);
    if exp.nu_k > one {
        if !(plus_d && minus_d) {
            return Err(Error::ScalingAssumption(
                "3.5(vii): both sides need flow-Dirichlet when nu_K > 1".into(),
            ));
        }
    } else if !(plus_d || minus_d) {
        return Err(Error::ScalingAssumption(
            "3.5(vii): at least one bulk side needs a flow-Dirichlet segment".into(),
        ));
    }
    // implemented-regime restriction: only nu_C >= 1 yields closed limit models
    if exp.nu_c < one {
        return Err(Error::ScalingAssumption(format!(
            "regime: nu_C >= 1 required (no closed limit model for nu_C < 1), got {}",
            exp.nu_c
        )));
    }

    let flow = if exp.nu_k < m1 {
        FlowRegime::IdealConduit
    } else if exp.nu_k == m1 {
        FlowRegime::Conduit
    } else if exp.nu_k < one {
        FlowRegime::Neutral
    } else if exp.nu_k == one {
        FlowRegime::Barrier
    } else {
        FlowRegime::Wall
    };
    let mech = if exp.nu_c == one {
        MechRegime::Soft
    } else {
        MechRegime::VerySoft
    };

    Ok(RegimeDescriptor {
        flow,
        mech,
        storage_present: exp.nu_omega == m1,
        biot_coupled: exp.nu_alpha_perp.mul2() == exp.nu_c.add_int(-1),
        flow_source_present: exp.nu_q == m1,
        mech_source_present: exp.nu_f.mul2() == exp.nu_c.add_int(-3),
        w_is_zero: geometry.fracture_has_dirichlet(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundarySegment, FlowBc};

    fn r(s: &str) -> Ratio {
        s.parse().unwrap()
    }

    #[test]
    fn rational_parsing_and_order() {
        assert_eq!(r("-1"), Ratio::int(-1));
        assert_eq!(r("3/6"), Ratio::new(1, 2));
        assert_eq!(r("-2/4"), Ratio::new(-1, 2));
        assert!(r("1/3") < r("1/2"));
        assert!(r("-1").mul2() == r("-2"));
        assert!("1/0".parse::<Ratio>().is_err());
    }

    #[test]
    fn soft_conduit_classifies() {
        let g = Geometry::default_unit();
        let exp = ScalingExponents::new(r("1"), r("-1"), r("-1"), r("0"), r("0"), r("-1"), r("-1"));
        let reg = validate_exponents(&exp, &g).unwrap();
        assert_eq!(reg.flow, FlowRegime::Conduit);
        assert_eq!(reg.mech, MechRegime::Soft);
        assert!(reg.storage_present && reg.biot_coupled);
        assert!(reg.flow_source_present && reg.mech_source_present);
        assert!(!reg.w_is_zero);
    }

    #[test]
    fn clause_i_violation_named() {
        let g = Geometry::default_unit();
        let exp = ScalingExponents::new(r("1"), r("-1"), r("-2"), r("0"), r("0"), r("-1"), r("-1"));
        let err = validate_exponents(&exp, &g).unwrap_err().to_string();
        assert!(err.contains("3.5(i)"), "{err}");
    }

    #[test]
    fn clause_vii_needs_both_sides_for_wall() {
        let mut g = Geometry::default_unit();
        g.boundary.iter_mut().for_each(|(s, bc)| {
            if *s == BoundarySegment::MinusLeft {
                *bc = FlowBc::Neumann;
            }
        });
        let exp = ScalingExponents::new(r("1"), r("2"), r("-1"), r("0"), r("0"), r("-1"), r("-1"));
        let err = validate_exponents(&exp, &g).unwrap_err().to_string();
        assert!(err.contains("3.5(vii)"), "{err}");
    }

    #[test]
    fn coupling_active_values() {
        let e = ScalingExponents::coupling_active(r("2"), r("1"));
        assert_eq!(e.nu_alpha_perp, r("1/2"));
        assert_eq!(e.nu_f, r("-1/2"));
        let g = Geometry::default_unit();
        let reg = validate_exponents(&e, &g).unwrap();
        assert!(reg.biot_coupled && reg.mech_source_present && reg.storage_present);
        assert_eq!(reg.flow, FlowRegime::Barrier);
        assert_eq!(reg.mech, MechRegime::VerySoft);
    }

    #[test]
    fn nuc_below_one_rejected() {
        let g = Geometry::default_unit();
        let exp = ScalingExponents::new(r("0"), r("0"), r("0"), r("0"), r("0"), r("0"), r("0"));
        let err = validate_exponents(&exp, &g).unwrap_err().to_string();
        assert!(err.contains("nu_C >= 1"), "{err}");
    }

    #[test]
    fn switch_is_exact_in_the_exponent() {
        let g = Geometry::default_unit();
        let on = ScalingExponents::new(r("1"), r("0"), r("-1"), r("0"), r("0"), r("-1"), r("-1"));
        let off = ScalingExponents::new(
            r("1"),
            r("0"),
            r("-1"),
            r("0"),
            r("0"),
            r("-1"),
            r("-999999999/1000000000"),
        );
        assert!(validate_exponents(&on, &g).unwrap().flow_source_present);
        assert!(!validate_exponents(&off, &g).unwrap().flow_source_present);
    }
}
