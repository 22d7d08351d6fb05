//! Radial basis functions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radial profile used by the interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `r² log r`, the thin-plate kernel (biharmonic in 2D).
    ThinPlate,
    /// `r`.
    Linear,
    /// `r³`.
    Cubic,
}

impl KernelKind {
    /// Polyharmonic default per dimension: `r² log r` in even dimensions,
    /// `r³` in odd ones.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim.is_multiple_of(2) {
            KernelKind::ThinPlate
        } else {
            KernelKind::Cubic
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::ThinPlate => "r2logr",
            KernelKind::Linear => "r",
            KernelKind::Cubic => "r3",
        }
    }

    /// `φ(r)`, with `φ(0) = 0` for every kind.
    #[inline]
    pub fn eval<T: Real>(self, r: T) -> T {
        match self {
            KernelKind::ThinPlate => {
                if r > T::zero() {
                    r * r * r.ln()
                } else {
                    T::zero()
                }
            }
            KernelKind::Linear => r,
            KernelKind::Cubic => r * r * r,
        }
    }

    /// `φ'(r) / r`, so that `∇φ(|x - c|) = factor · (x - c)`.
    ///
    /// Returns zero at `r = 0`, the limit for `r² log r` and `r³` and the
    /// zero subgradient for `r`.
    #[inline]
    pub fn gradient_factor<T: Real>(self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        match self {
            KernelKind::ThinPlate => T::lit(2.0) * r.ln() + T::one(),
            KernelKind::Linear => r.recip(),
            KernelKind::Cubic => T::lit(3.0) * r,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r2logr" | "r2log" | "thin-plate" | "thinplate" | "tps" => Ok(KernelKind::ThinPlate),
            "r" | "r1" | "linear" => Ok(KernelKind::Linear),
            "r3" | "cubic" => Ok(KernelKind::Cubic),
            other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Evaluates `φ(r)`, rejecting negative or non-finite radii.
pub fn kernel_eval<T: Real>(r: T, kind: KernelKind) -> Result<T> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("radius {r} is not finite")));
    }
    if r < T::zero() {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    Ok(kind.eval(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        assert_eq!(kernel_eval(1.0_f64, KernelKind::ThinPlate).unwrap(), 0.0);
        for kind in [KernelKind::ThinPlate, KernelKind::Linear, KernelKind::Cubic] {
            assert_eq!(kernel_eval(0.0_f64, kind).unwrap(), 0.0);
        }
        assert_eq!(kernel_eval(2.0_f64, KernelKind::Cubic).unwrap(), 8.0);
        assert_eq!(kernel_eval(2.0_f32, KernelKind::Linear).unwrap(), 2.0);
    }

    #[test]
    fn negative_radius_is_domain_error() {
        assert!(matches!(
            kernel_eval(-0.5_f64, KernelKind::Cubic),
            Err(Error::Domain(_))
        ));
        assert!(kernel_eval(f64::NAN, KernelKind::Linear).is_err());
    }

    #[test]
    fn thin_plate_changes_sign_at_one() {
        assert!(KernelKind::ThinPlate.eval(0.5_f64) < 0.0);
        assert!(KernelKind::ThinPlate.eval(2.0_f64) > 0.0);
    }

    #[test]
    fn gradient_factor_matches_derivative() {
        let h = 1e-6;
        for kind in [KernelKind::ThinPlate, KernelKind::Linear, KernelKind::Cubic] {
            for &r in &[0.3_f64, 1.0, 1.7] {
                let fd = (kind.eval(r + h) - kind.eval(r - h)) / (2.0 * h);
                assert!((fd / r - kind.gradient_factor(r)).abs() < 1e-6, "{kind} at {r}");
            }
        }
    }

    #[test]
    fn defaults_and_names() {
        assert_eq!(KernelKind::default_for_dim(2), KernelKind::ThinPlate);
        assert_eq!(KernelKind::default_for_dim(3), KernelKind::Cubic);
        assert_eq!(KernelKind::default_for_dim(4), KernelKind::ThinPlate);
        assert_eq!(KernelKind::default_for_dim(5), KernelKind::Cubic);
        for kind in [KernelKind::ThinPlate, KernelKind::Linear, KernelKind::Cubic] {
            assert_eq!(kind.name().parse::<KernelKind>().unwrap(), kind);
        }
        assert!("gauss".parse::<KernelKind>().is_err());
    }
}
