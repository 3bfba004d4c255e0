//! Solid primitives used to build link inertias.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A principal axis of a link frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "x", alias = "+x", alias = "-x")]
    X,
    #[serde(rename = "y", alias = "+y", alias = "-y")]
    Y,
    #[serde(rename = "z", alias = "+z", alias = "-z")]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Cylinder { radius: f64, length: f64, axis: Axis },
    Box { size: [f64; 3] },
}

/// A solid of uniform density placed in a link frame.
///
/// The dimension lying along `growth_axis` (and the placement component on
/// that axis) is multiplied by the link length multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapePrimitive {
    #[serde(flatten)]
    pub kind: ShapeKind,
    /// Geometric center in the link frame.
    #[serde(default)]
    pub center: [f64; 3],
    pub growth_axis: Axis,
}

/// Mass properties of a link expressed in its own frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the center of mass, link-frame axes.
    pub inertia: Matrix3<f64>,
}

/// Scale the component of `v` along `axis` by `multiplier`.
pub fn scale_along(v: &Vector3<f64>, axis: Axis, multiplier: f64) -> Vector3<f64> {
    let mut out = *v;
    out[axis.index()] *= multiplier;
    out
}

impl ShapePrimitive {
    pub fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match &self.kind {
            ShapeKind::Sphere { radius } => vec![*radius],
            ShapeKind::Cylinder { radius, length, .. } => vec![*radius, *length],
            ShapeKind::Box { size } => size.to_vec(),
        };
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidShape(format!(
                "non-positive dimension in {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Nominal volume at unit length multiplier.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            ShapeKind::Sphere { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            ShapeKind::Cylinder { radius, length, .. } => PI * radius * radius * length,
            ShapeKind::Box { size } => size[0] * size[1] * size[2],
        }
    }
}

/// Closed-form mass, center of mass and inertia of `shape` with density
/// `density` and its growth-axis dimension scaled by `multiplier`.
pub fn link_inertia(shape: &ShapePrimitive, density: f64, multiplier: f64) -> Result<MassProperties> {
    shape.validate()?;
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InvalidShape(format!("density {density} must be positive")));
    }
    if !(multiplier > 0.0) || !multiplier.is_finite() {
        return Err(Error::InvalidShape(format!(
            "length multiplier {multiplier} must be positive"
        )));
    }
    let g = shape.growth_axis.index();
    let (mass, diag) = match &shape.kind {
        ShapeKind::Box { size } => {
            let mut e = Vector3::from(*size);
            e[g] *= multiplier;
            let m = density * e.x * e.y * e.z;
            let d = Vector3::new(
                e.y * e.y + e.z * e.z,
                e.x * e.x + e.z * e.z,
                e.x * e.x + e.y * e.y,
            ) * (m / 12.0);
            (m, d)
        }
        ShapeKind::Sphere { radius } => {
            // scaled along one axis the sphere becomes an ellipsoid
            let mut a = Vector3::repeat(*radius);
            a[g] *= multiplier;
            let m = density * 4.0 / 3.0 * PI * a.x * a.y * a.z;
            let d = Vector3::new(
                a.y * a.y + a.z * a.z,
                a.x * a.x + a.z * a.z,
                a.x * a.x + a.y * a.y,
            ) * (m / 5.0);
            (m, d)
        }
        ShapeKind::Cylinder {
            radius,
            length,
            axis,
        } => {
            let k = axis.index();
            let mut semi = Vector3::repeat(*radius);
            let mut len = *length;
            if g == k {
                len *= multiplier;
            } else {
                semi[g] *= multiplier;
            }
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let m = density * PI * semi[i] * semi[j] * len;
            let mut d = Vector3::zeros();
            d[k] = m * (semi[i] * semi[i] + semi[j] * semi[j]) / 4.0;
            d[i] = m * (semi[j] * semi[j] / 4.0 + len * len / 12.0);
            d[j] = m * (semi[i] * semi[i] / 4.0 + len * len / 12.0);
            (m, d)
        }
    };
    Ok(MassProperties {
        mass,
        com: scale_along(&Vector3::from(shape.center), shape.growth_axis, multiplier),
        inertia: Matrix3::from_diagonal(&diag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn boxed(size: [f64; 3], center: [f64; 3]) -> ShapePrimitive {
        ShapePrimitive {
            kind: ShapeKind::Box { size },
            center,
            growth_axis: Axis::Z,
        }
    }

    #[test]
    fn box_mass() {
        let p = link_inertia(&boxed([0.1, 0.1, 0.2], [0.0; 3]), 1000.0, 1.0).unwrap();
        assert_relative_eq!(p.mass, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.inertia[(2, 2)], 2.0 * 0.02 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn cylinder_mass_scales_linearly() {
        let c = ShapePrimitive {
            kind: ShapeKind::Cylinder {
                radius: 0.05,
                length: 0.2,
                axis: Axis::Z,
            },
            center: [0.0, 0.0, -0.1],
            growth_axis: Axis::Z,
        };
        let base = link_inertia(&c, 1000.0, 1.0).unwrap();
        let grown = link_inertia(&c, 1000.0, 1.5).unwrap();
        assert_relative_eq!(grown.mass, 1.5 * base.mass, epsilon = 1e-12);
        assert_relative_eq!(grown.com.z, -0.15, epsilon = 1e-15);
    }

    #[test]
    fn sphere_inertia() {
        let s = ShapePrimitive {
            kind: ShapeKind::Sphere { radius: 0.1 },
            center: [0.0; 3],
            growth_axis: Axis::X,
        };
        let p = link_inertia(&s, 1000.0, 1.0).unwrap();
        for k in 0..3 {
            assert_relative_eq!(p.inertia[(k, k)], 0.4 * p.mass * 0.01, epsilon = 1e-14);
        }
    }

    #[test]
    fn cylinder_grown_across_its_axis() {
        let c = ShapePrimitive {
            kind: ShapeKind::Cylinder {
                radius: 0.05,
                length: 0.3,
                axis: Axis::Z,
            },
            center: [0.0; 3],
            growth_axis: Axis::X,
        };
        let base = link_inertia(&c, 500.0, 1.0).unwrap();
        let wide = link_inertia(&c, 500.0, 2.0).unwrap();
        assert_relative_eq!(wide.mass, 2.0 * base.mass, epsilon = 1e-12);
        assert!(wide.inertia[(1, 1)] > 2.0 * base.inertia[(1, 1)]);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let b = boxed([0.1, 0.0, 0.2], [0.0; 3]);
        assert!(matches!(link_inertia(&b, 1000.0, 1.0), Err(Error::InvalidShape(_))));
        let ok = boxed([0.1, 0.1, 0.2], [0.0; 3]);
        assert!(link_inertia(&ok, -1.0, 1.0).is_err());
        assert!(link_inertia(&ok, 1.0, 0.0).is_err());
    }

    #[test]
    fn shape_json_roundtrip() {
        let json = r#"{"kind":"cylinder","radius":0.04,"length":0.3,"axis":"z","center":[0,0,-0.15],"growth_axis":"-z"}"#;
        let s: ShapePrimitive = serde_json::from_str(json).unwrap();
        assert_eq!(s.growth_axis, Axis::Z);
        let back: ShapePrimitive = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
