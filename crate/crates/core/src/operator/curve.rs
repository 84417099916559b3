use std::f64::consts::{PI, TAU};
use std::path::Path;

use super::{dense_oracle, DenseOracle};
use crate::error::{invalid, Error};
use crate::linalg::DenseMatrix;
use crate::Result;

/// Ordered points in the plane. Consecutive indices should be geometric
/// neighbours (points along a curve ordered by parameter) so that tree
/// intervals map to contiguous pieces of the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet2D {
    points: Vec<[f64; 2]>,
}

impl PointSet2D {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("point set is empty"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        Ok(Self { points })
    }

    /// `n` points at equispaced parameter values on a closed curve.
    pub fn on_curve(curve: &impl ClosedCurve, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| curve.point(TAU * i as f64 / n as f64)).collect())
    }

    /// Reads whitespace separated `x y` pairs, one point per line. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            match vals[..] {
                [x, y] => points.push([x, y]),
                _ => {
                    return Err(Error::Format(format!(
                        "line {}: expected 2 coordinates, found {}",
                        lineno + 1,
                        vals.len()
                    )))
                }
            }
        }
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }
}

/// Smooth closed curve parametrised on `[0, 2π)`, counterclockwise.
pub trait ClosedCurve {
    fn point(&self, t: f64) -> [f64; 2];
    fn velocity(&self, t: f64) -> [f64; 2];
    fn acceleration(&self, t: f64) -> [f64; 2];
}

/// Star-shaped curve `r(θ) = radius * (1 + amplitude * cos(lobes * θ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarCurve {
    pub radius: f64,
    pub amplitude: f64,
    pub lobes: f64,
}

impl StarCurve {
    pub fn circle(radius: f64) -> Self {
        Self {
            radius,
            amplitude: 0.0,
            lobes: 0.0,
        }
    }

    /// Three-lobed star `r(θ) = 1 + 0.3 cos 3θ`.
    pub fn three_lobed() -> Self {
        Self {
            radius: 1.0,
            amplitude: 0.3,
            lobes: 3.0,
        }
    }

    fn r(&self, t: f64) -> [f64; 3] {
        let (a, k, r0) = (self.amplitude, self.lobes, self.radius);
        [
            r0 * (1.0 + a * (k * t).cos()),
            -r0 * a * k * (k * t).sin(),
            -r0 * a * k * k * (k * t).cos(),
        ]
    }
}

impl ClosedCurve for StarCurve {
    fn point(&self, t: f64) -> [f64; 2] {
        let [r, _, _] = self.r(t);
        [r * t.cos(), r * t.sin()]
    }

    fn velocity(&self, t: f64) -> [f64; 2] {
        let [r, dr, _] = self.r(t);
        let (s, c) = t.sin_cos();
        [dr * c - r * s, dr * s + r * c]
    }

    fn acceleration(&self, t: f64) -> [f64; 2] {
        let [r, dr, ddr] = self.r(t);
        let (s, c) = t.sin_cos();
        [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s]
    }
}

/// `A(i, j) = -log|x_i - x_j| / (2π)` off the diagonal, zero on it.
pub fn log_kernel_matrix(points: &PointSet2D) -> Result<DenseMatrix> {
    let p = points.points();
    let n = p.len();
    let mut a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in j + 1..n {
            let d = ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt();
            if d == 0.0 {
                return Err(invalid(format!("points {j} and {i} coincide")));
            }
            let v = -d.ln() / TAU;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

pub fn log_kernel_oracle(points: &PointSet2D) -> Result<DenseOracle> {
    dense_oracle(log_kernel_matrix(points)?)
}

/// Nyström discretisation of `½I + D` on `curve` with the `n`-point
/// trapezoidal rule, where `D` is the double-layer operator with kernel
/// `(x - y)·n(y) / (2π |x - y|²)`.
pub fn double_layer_oracle(curve: &impl ClosedCurve, n: usize) -> Result<DenseOracle> {
    if n < 8 {
        return Err(invalid(format!("need at least 8 nodes, got {n}")));
    }
    let h = TAU / n as f64;
    let mut x = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let t = h * i as f64;
        let v = curve.velocity(t);
        let acc = curve.acceleration(t);
        let speed = v[0].hypot(v[1]);
        if !(speed > 1e-12) || !speed.is_finite() {
            return Err(invalid(format!("curve speed vanishes at t = {t}")));
        }
        let curvature = (v[0] * acc[1] - v[1] * acc[0]) / speed.powi(3);
        x.push(curve.point(t));
        normal.push([v[1] / speed, -v[0] / speed]);
        weight.push(speed * h);
        diag.push(-curvature / (4.0 * PI));
    }

    let mut a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let (y, ny, w) = (x[j], normal[j], weight[j]);
        for i in 0..n {
            let k = if i == j {
                diag[j]
            } else {
                let d = [x[i][0] - y[0], x[i][1] - y[1]];
                (d[0] * ny[0] + d[1] * ny[1]) / (TAU * (d[0] * d[0] + d[1] * d[1]))
            };
            a[(i, j)] = k * w;
        }
        a[(j, j)] += 0.5;
    }
    dense_oracle(a)
}
