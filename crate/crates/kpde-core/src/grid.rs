//! Periodic computational grid on the box [-R, R)^d and fields sampled on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid: d in {1, 2}, n points per axis (a power of two),
/// points x_j = -R + j * dx with dx = 2R / n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        let spec = Self {
            dim,
            half_width,
            points_per_axis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "grid dim must be 1 or 2, got {}",
                self.dim
            )));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidArgument(
                "grid half_width must be positive and finite".into(),
            ));
        }
        if self.points_per_axis < 16 || !self.points_per_axis.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "points_per_axis must be a power of two >= 16, got {}",
                self.points_per_axis
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Quadrature weight of one grid cell, dx^d.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Coordinate along one axis.
    pub fn axis_coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Coordinates of the flattened point (row-major, x fastest).
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [self.axis_coord(flat), 0.0],
            _ => [self.axis_coord(flat % n), self.axis_coord(flat / n)],
        }
    }

    /// Angular frequency of FFT bin `m` along one axis (period 2R).
    pub fn frequency(&self, m: usize) -> f64 {
        let n = self.points_per_axis;
        let k = if m <= n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        };
        k * std::f64::consts::PI / self.half_width
    }

    /// |xi|^2 of the flattened spectral bin.
    pub fn frequency_sq(&self, flat: usize) -> f64 {
        let n = self.points_per_axis;
        match self.dim {
            1 => {
                let k = self.frequency(flat);
                k * k
            }
            _ => {
                let kx = self.frequency(flat % n);
                let ky = self.frequency(flat / n);
                kx * kx + ky * ky
            }
        }
    }
}

/// A real scalar field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            values: vec![0.0; spec.total_points()],
            spec,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_points() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grid needs {}",
                values.len(),
                spec.total_points()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(spec: GridSpec, f: F) -> Self {
        let values = (0..spec.total_points())
            .map(|i| {
                let p = spec.point(i);
                f(&p[..spec.dim()])
            })
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Discrete L2 norm, (sum v^2 dx^d)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.spec.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// self += scale * other
    pub fn axpy(&mut self, scale: f64, other: &GridField) {
        debug_assert_eq!(self.spec, other.spec);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }
}

/// Closed-form scalar expressions sampled onto grids: potentials, initial
/// data and source shapes are all described this way in configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldExpr {
    Zero,
    Constant {
        value: f64,
    },
    /// amplitude * prod_a cos(modes[a] * pi * x_a / R + phases[a]);
    /// integer modes are exact torus eigenfunctions.
    Trig {
        amplitude: f64,
        modes: Vec<f64>,
        #[serde(default)]
        phases: Vec<f64>,
    },
    /// amplitude * exp(-|x - center|^2 / (2 width^2))
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    Sum {
        terms: Vec<FieldExpr>,
    },
}

impl FieldExpr {
    pub fn eval(&self, x: &[f64], half_width: f64) -> f64 {
        match self {
            FieldExpr::Zero => 0.0,
            FieldExpr::Constant { value } => *value,
            FieldExpr::Trig {
                amplitude,
                modes,
                phases,
            } => {
                let mut v = *amplitude;
                for (a, &xa) in x.iter().enumerate() {
                    let m = modes.get(a).copied().unwrap_or(0.0);
                    let ph = phases.get(a).copied().unwrap_or(0.0);
                    v *= (m * std::f64::consts::PI * xa / half_width + ph).cos();
                }
                v
            }
            FieldExpr::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let mut r2 = 0.0;
                for (a, &xa) in x.iter().enumerate() {
                    let c = center.get(a).copied().unwrap_or(0.0);
                    r2 += (xa - c) * (xa - c);
                }
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            FieldExpr::Sum { terms } => terms.iter().map(|t| t.eval(x, half_width)).sum(),
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> GridField {
        GridField::from_fn(*spec, |x| self.eval(x, spec.half_width))
    }

    /// sin(k * pi * x_1 / R), an exact Laplacian eigenmode for integer k.
    pub fn sine_mode(k: f64) -> Self {
        FieldExpr::Trig {
            amplitude: 1.0,
            modes: vec![k],
            phases: vec![-std::f64::consts::FRAC_PI_2],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            FieldExpr::Zero | FieldExpr::Constant { .. } => Ok(()),
            FieldExpr::Trig { modes, phases, .. } => {
                if modes.len() != dim || (!phases.is_empty() && phases.len() != dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "trig expression needs {dim} modes/phases"
                    )));
                }
                Ok(())
            }
            FieldExpr::GaussianBump { center, width, .. } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "bump center needs {dim} coordinates"
                    )));
                }
                if !(*width > 0.0) {
                    return Err(Error::InvalidArgument("bump width must be positive".into()));
                }
                Ok(())
            }
            FieldExpr::Sum { terms } => terms.iter().try_for_each(|t| t.validate(dim)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_and_dx() {
        let spec = GridSpec::new(1, 5.0, 16).unwrap();
        assert_eq!(spec.dx(), 0.625);
        assert_eq!(spec.axis_coord(0), -5.0);
        assert_eq!(spec.axis_coord(8), 0.0);
        assert_eq!(spec.total_points(), 16);
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(GridSpec::new(3, 5.0, 16).is_err());
        assert!(GridSpec::new(1, 5.0, 12).is_err());
        assert!(GridSpec::new(1, 5.0, 8).is_err());
        assert!(GridSpec::new(1, -1.0, 16).is_err());
    }

    #[test]
    fn l2_norm_of_constant() {
        let spec = GridSpec::new(1, 2.0, 16).unwrap();
        let f = GridField::from_fn(spec, |_| 3.0);
        // integral of 9 over [-2, 2) is 36
        assert!((f.l2_norm() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sine_mode_is_odd_eigenfunction() {
        let spec = GridSpec::new(1, std::f64::consts::PI, 64).unwrap();
        let f = FieldExpr::sine_mode(2.0).sample(&spec);
        let x = spec.axis_coord(5);
        assert!((f.values()[5] - (2.0 * x).sin()).abs() < 1e-12);
    }

    #[test]
    fn frequency_layout() {
        let spec = GridSpec::new(1, std::f64::consts::PI, 16).unwrap();
        assert_eq!(spec.frequency(0), 0.0);
        assert!((spec.frequency(1) - 1.0).abs() < 1e-15);
        assert!((spec.frequency(15) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_dim_flattening() {
        let spec = GridSpec::new(2, 1.0, 16).unwrap();
        let f = GridField::from_fn(spec, |x| x[0] + 10.0 * x[1]);
        let p = spec.point(3 + 5 * 16);
        assert_eq!(f.values()[3 + 5 * 16], p[0] + 10.0 * p[1]);
    }
}
