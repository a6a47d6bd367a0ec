//! SCAD and MCP penalties: values, derivatives and the minimizers of their
//! quadratic decompositions.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Scad,
    Mcp,
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
        })
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            other => Err(Error::InvalidParameter(format!("unknown penalty family {other:?}"))),
        }
    }
}

/// Penalty family and parameters. `lambda = 0` is accepted and means no penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyEval {
    pub value: f64,
    pub deriv: f64,
    pub gstar: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, a: f64) -> Result<Self> {
        let s = PenaltySpec { family, lambda, a };
        s.validate()?;
        Ok(s)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, a)
    }

    pub fn mcp(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        let ok = match self.family {
            PenaltyFamily::Scad => self.a > 1.0,
            PenaltyFamily::Mcp => self.a > 0.0,
        } && self.a.is_finite();
        if !ok {
            return Err(Error::InvalidParameter(format!("shape a = {} not admissible for {}", self.a, self.family)));
        }
        Ok(())
    }

    /// Upper end of the range of g: λ for SCAD, aλ for MCP.
    pub fn g_upper(&self) -> f64 {
        match self.family {
            PenaltyFamily::Scad => self.lambda,
            PenaltyFamily::Mcp => self.a * self.lambda,
        }
    }

    /// Threshold beyond which the penalty is flat.
    pub fn flat_from(&self) -> f64 {
        self.a * self.lambda
    }

    /// Constant value on the flat part.
    pub fn max_value(&self) -> f64 {
        let l = self.lambda;
        match self.family {
            PenaltyFamily::Scad => 0.5 * (self.a + 1.0) * l * l,
            PenaltyFamily::Mcp => 0.5 * self.a * l * l,
        }
    }

    /// P(θ) for θ ≥ 0.
    #[inline]
    pub fn value(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0);
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Scad => {
                if theta <= l {
                    l * theta
                } else if theta <= a * l {
                    (2.0 * a * l * theta - theta * theta - l * l) / (2.0 * (a - 1.0))
                } else {
                    0.5 * (a + 1.0) * l * l
                }
            }
            PenaltyFamily::Mcp => {
                if theta <= a * l {
                    l * theta - theta * theta / (2.0 * a)
                } else {
                    0.5 * a * l * l
                }
            }
        }
    }

    /// P′(θ), right-continuous.
    #[inline]
    pub fn deriv(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0);
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Scad => {
                if theta < l {
                    l
                } else {
                    ((a * l - theta).max(0.0) / (a - 1.0)).min(l)
                }
            }
            PenaltyFamily::Mcp => (a * l - theta).max(0.0) / a,
        }
    }

    /// Minimizer of the inner decomposition problem in g.
    #[inline]
    pub fn gstar(&self, theta: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Scad => ((a * l - theta) / (a - 1.0)).clamp(0.0, l),
            PenaltyFamily::Mcp => theta.clamp(0.0, a * l),
        }
    }

    /// Inner objective whose minimum over g gives the penalty up to a constant:
    /// SCAD `(θ−aλ)κ + ½(a−1)κ²`, MCP `κ²/(2a) − (κ/a−λ)θ`.
    pub fn inner(&self, theta: f64, kappa: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        match self.family {
            PenaltyFamily::Scad => (theta - a * l) * kappa + 0.5 * (a - 1.0) * kappa * kappa,
            PenaltyFamily::Mcp => kappa * kappa / (2.0 * a) - (kappa / a - l) * theta,
        }
    }

    /// Per-coordinate constant c with `min_κ inner(θ, κ) = P(θ) − c`.
    pub fn decomposition_offset(&self) -> f64 {
        match self.family {
            PenaltyFamily::Scad => self.max_value(),
            PenaltyFamily::Mcp => 0.0,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::InvalidParameter(format!("theta must be >= 0, got {theta}")));
    }
    Ok(())
}

pub fn penalty_value(theta: f64, spec: &PenaltySpec) -> Result<f64> {
    check_theta(theta)?;
    Ok(spec.value(theta))
}

pub fn penalty_deriv(theta: f64, spec: &PenaltySpec) -> Result<f64> {
    check_theta(theta)?;
    Ok(spec.deriv(theta))
}

pub fn g_star(theta: f64, spec: &PenaltySpec) -> Result<f64> {
    check_theta(theta)?;
    Ok(spec.gstar(theta))
}

pub fn evaluate(theta: f64, spec: &PenaltySpec) -> Result<PenaltyEval> {
    check_theta(theta)?;
    Ok(PenaltyEval { value: spec.value(theta), deriv: spec.deriv(theta), gstar: spec.gstar(theta) })
}

/// ℒ(x) = ½xᵀQx + qᵀx + const + n·Σ_{penalized} P(|x_i|).
pub fn objective_eval(inst: &ProblemInstance, x: &[f64]) -> Result<f64> {
    if x.len() != inst.dim() {
        return Err(Error::Dimension(format!("point has {} entries, instance has {}", x.len(), inst.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective point".into()));
    }
    Ok(inst.objective(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_origin() {
        let s = PenaltySpec::scad(0.7, 3.0).unwrap();
        assert_eq!(s.value(0.0), 0.0);
    }

    #[test]
    fn flat_values() {
        let s = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert!((s.value(5.0) - 2.35).abs() < 1e-15);
        let m = PenaltySpec::mcp(0.5, 2.0).unwrap();
        assert!((m.value(0.5) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn clamped_gstar() {
        let s = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert_eq!(s.gstar(0.5), 1.0);
        let m = PenaltySpec::mcp(0.5, 2.0).unwrap();
        assert_eq!(m.gstar(2.0), 1.0);
        assert_eq!(m.deriv(1.0), 0.0);
    }

    #[test]
    fn rejects_negative_theta() {
        let s = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert!(penalty_value(-1.0, &s).is_err());
    }

    #[test]
    fn parameter_checks() {
        assert!(PenaltySpec::scad(1.0, 1.0).is_err());
        assert!(PenaltySpec::mcp(1.0, 0.5).is_ok());
        assert!(PenaltySpec::mcp(-1.0, 2.0).is_err());
    }
}
