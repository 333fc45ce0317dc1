//! Poincaré-ball geometry: exponential/logarithmic maps at the origin,
//! Möbius gyrovector operations, the geodesic metric and the geodesic
//! cosine similarity used as an attention kernel.
//!
//! The ball of curvature `−c` is `{x : c‖x‖² < 1}`. All arithmetic is `f64`.
//! Results are clamped to `‖x‖ ≤ (1 − 1e-5)/√c` so that `atanh` never sees
//! its pole; see [`ball::BALL_EPS`].
//!
//! The typed functions here validate their inputs and are what callers
//! outside the crate should use. The layers in [`crate::gcsa`] work on the
//! unchecked slice kernels in [`ball`] directly.

pub mod ball;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, Matrix};

/// Magnitude `c` of the (negative) ball curvature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Curvature(c))
        } else {
            Err(Error::InvalidInput(format!(
                "curvature must be positive and finite, got {c}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Largest admissible point norm, `(1 − ε)/√c`.
    pub fn max_norm(self) -> f64 {
        ball::max_norm(self.0)
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Curvature(1.0)
    }
}

impl TryFrom<f64> for Curvature {
    type Error = Error;
    fn try_from(c: f64) -> Result<Self> {
        Curvature::new(c)
    }
}

impl From<Curvature> for f64 {
    fn from(c: Curvature) -> f64 {
        c.0
    }
}

/// A finite vector in flat (tangent) space.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanVector(Vec<f64>);

impl EuclideanVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        Ok(EuclideanVector(data))
    }

    pub fn zeros(dim: usize) -> Self {
        EuclideanVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

/// A point strictly inside the Poincaré ball of a given curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    curvature: Curvature,
}

impl BallPoint {
    /// Accepts any finite point with `c‖x‖² < 1`.
    pub fn new(coords: Vec<f64>, curvature: Curvature) -> Result<Self> {
        if !all_finite(&coords) {
            return Err(Error::InvalidInput("non-finite ball coordinate".into()));
        }
        let c = curvature.value();
        if c * crate::linalg::norm_sq(&coords) >= 1.0 {
            return Err(Error::Domain(format!(
                "point of norm {} lies outside the ball of radius {}",
                norm(&coords),
                1.0 / c.sqrt()
            )));
        }
        Ok(BallPoint { coords, curvature })
    }

    pub fn origin(dim: usize, curvature: Curvature) -> Self {
        BallPoint {
            coords: vec![0.0; dim],
            curvature,
        }
    }

    /// Wraps kernel output that is already projected.
    pub(crate) fn from_projected(coords: Vec<f64>, curvature: Curvature) -> Self {
        debug_assert!(norm(&coords) <= curvature.max_norm() * (1.0 + 1e-12));
        BallPoint { coords, curvature }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    /// Gyrogroup inverse `⊖x = −x`.
    pub fn neg(&self) -> BallPoint {
        BallPoint {
            coords: self.coords.iter().map(|v| -v).collect(),
            curvature: self.curvature,
        }
    }
}

fn same_space(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    if x.curvature != y.curvature {
        return Err(Error::InvalidInput(format!(
            "curvature mismatch: {} vs {}",
            x.curvature.value(),
            y.curvature.value()
        )));
    }
    if x.dim() != y.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(x.curvature.value())
}

pub fn exp0(v: &EuclideanVector, c: Curvature) -> BallPoint {
    BallPoint::from_projected(ball::exp0(v.as_slice(), c.value()), c)
}

pub fn log0(x: &BallPoint) -> Result<EuclideanVector> {
    let c = x.curvature.value();
    if x.norm() * c.sqrt() >= 1.0 {
        return Err(Error::Domain(
            "log0 of a point on or outside the ball".into(),
        ));
    }
    Ok(EuclideanVector(ball::log0(&x.coords, c)))
}

pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> Result<BallPoint> {
    let c = same_space(x, y)?;
    Ok(BallPoint::from_projected(
        ball::mobius_add(&x.coords, &y.coords, c),
        x.curvature,
    ))
}

pub fn mobius_scalar_mul(r: f64, x: &BallPoint) -> Result<BallPoint> {
    if !r.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite scalar {r}")));
    }
    Ok(BallPoint::from_projected(
        ball::mobius_scalar_mul(r, &x.coords, x.curvature.value()),
        x.curvature,
    ))
}

/// `W ⊗_c x = exp0(W · log0(x))`; maps between dimensions.
pub fn mobius_matvec(w: &Matrix, x: &BallPoint) -> Result<BallPoint> {
    if w.cols() != x.dim() {
        return Err(Error::InvalidInput(format!(
            "matrix has {} columns but point has dimension {}",
            w.cols(),
            x.dim()
        )));
    }
    Ok(BallPoint::from_projected(
        ball::mobius_matvec(w, &x.coords, x.curvature.value()),
        x.curvature,
    ))
}

/// Curvature-consistent affine map `(W ⊗_c x) ⊕_c b`.
#[derive(Clone, Debug)]
pub struct MobiusLinear {
    pub weight: Matrix,
    pub bias: BallPoint,
}

impl MobiusLinear {
    pub fn new(weight: Matrix, bias: BallPoint) -> Result<Self> {
        if weight.rows() != bias.dim() {
            return Err(Error::InvalidInput(format!(
                "bias dimension {} does not match {} output rows",
                bias.dim(),
                weight.rows()
            )));
        }
        Ok(MobiusLinear { weight, bias })
    }

    pub fn apply(&self, x: &BallPoint) -> Result<BallPoint> {
        mobius_linear(self, x)
    }
}

pub fn mobius_linear(params: &MobiusLinear, x: &BallPoint) -> Result<BallPoint> {
    let wx = mobius_matvec(&params.weight, x)?;
    mobius_add(&wx, &params.bias)
}

pub fn geodesic_dist(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    let c = same_space(x, y)?;
    Ok(ball::geodesic_dist(&x.coords, &y.coords, c))
}

/// Geodesic cosine similarity `cos((√c/2)·d_c(x, y))`, in `[−1, 1]`.
pub fn gcs(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    let c = same_space(x, y)?;
    Ok(ball::gcs(&x.coords, &y.coords, c))
}

pub fn project_to_ball(x: &[f64], c: Curvature) -> Result<BallPoint> {
    if !all_finite(x) {
        return Err(Error::InvalidInput("non-finite vector entry".into()));
    }
    Ok(BallPoint::from_projected(ball::project(x, c.value()), c))
}
