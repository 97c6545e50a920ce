//! Geometric paths `p(s)`, `s ∈ [0, 1]`, built as natural cubic splines
//! through joint-space waypoints.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single joint-space waypoint at path position `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub s: f64,
    pub q: Vec<f64>,
}

/// On-disk path definition: `{"waypoints": [{"s": .., "q": [..]}, ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub waypoints: Vec<Waypoint>,
}

impl PathConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<PathSpline> {
        PathSpline::from_waypoints(&self.waypoints)
    }
}

/// Which derivative of the path to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Position,
    First,
    Second,
}

impl TryFrom<u8> for Derivative {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Derivative::Position),
            1 => Ok(Derivative::First),
            2 => Ok(Derivative::Second),
            other => Err(Error::InvalidConfig(format!("derivative order {other} not in 0..=2"))),
        }
    }
}

/// Path position together with its first two derivatives at one `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    pub ddq: DVector<f64>,
}

/// Piecewise cubic path over the knot vector `knots` (first knot 0, last 1).
///
/// `coeffs[k][j]` holds `[c0, c1, c2, c3]` for joint `j` on segment `k`,
/// in powers of `s - knots[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpline {
    joint_count: usize,
    knots: Vec<f64>,
    coeffs: Vec<Vec<[f64; 4]>>,
}

impl PathSpline {
    /// Natural cubic spline interpolating the waypoints.
    pub fn from_waypoints(waypoints: &[Waypoint]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidWaypoints(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        let joint_count = waypoints[0].q.len();
        if joint_count == 0 {
            return Err(Error::InvalidWaypoints("waypoints have no joints".into()));
        }
        for w in waypoints {
            if w.q.len() != joint_count {
                return Err(Error::DimensionMismatch { expected: joint_count, got: w.q.len() });
            }
            if !w.s.is_finite() || w.q.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidWaypoints("non-finite waypoint".into()));
            }
        }
        if waypoints[0].s != 0.0 || waypoints[waypoints.len() - 1].s != 1.0 {
            return Err(Error::InvalidWaypoints("first s must be 0 and last s must be 1".into()));
        }
        if waypoints.windows(2).any(|w| w[1].s <= w[0].s) {
            return Err(Error::InvalidWaypoints("s-values must be strictly increasing".into()));
        }

        let knots: Vec<f64> = waypoints.iter().map(|w| w.s).collect();
        let segments = knots.len() - 1;
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();

        let mut coeffs = vec![vec![[0.0; 4]; joint_count]; segments];
        for j in 0..joint_count {
            let y: Vec<f64> = waypoints.iter().map(|w| w.q[j]).collect();
            let m = natural_second_derivatives(&h, &y);
            for k in 0..segments {
                let hk = h[k];
                coeffs[k][j] = [
                    y[k],
                    (y[k + 1] - y[k]) / hk - hk * (2.0 * m[k] + m[k + 1]) / 6.0,
                    m[k] / 2.0,
                    (m[k + 1] - m[k]) / (6.0 * hk),
                ];
            }
        }
        Ok(Self { joint_count, knots, coeffs })
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn segment(&self, s: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfDomain(s));
        }
        let k = self.knots.partition_point(|&knot| knot <= s).clamp(1, self.knots.len() - 1) - 1;
        Ok((k, s - self.knots[k]))
    }

    /// Evaluates `p(s)`, `p'(s)` or `p''(s)`. Rejects `s` outside `[0, 1]`.
    pub fn eval(&self, s: f64, order: Derivative) -> Result<DVector<f64>> {
        let (k, t) = self.segment(s)?;
        Ok(DVector::from_iterator(
            self.joint_count,
            self.coeffs[k].iter().map(|c| match order {
                Derivative::Position => horner(c, t),
                Derivative::First => c[1] + t * (2.0 * c[2] + 3.0 * c[3] * t),
                Derivative::Second => 2.0 * c[2] + 6.0 * c[3] * t,
            }),
        ))
    }

    /// All three derivatives at once.
    pub fn point(&self, s: f64) -> Result<PathPoint> {
        let (k, t) = self.segment(s)?;
        let n = self.joint_count;
        let mut q = DVector::zeros(n);
        let mut dq = DVector::zeros(n);
        let mut ddq = DVector::zeros(n);
        for (j, c) in self.coeffs[k].iter().enumerate() {
            q[j] = horner(c, t);
            dq[j] = c[1] + t * (2.0 * c[2] + 3.0 * c[3] * t);
            ddq[j] = 2.0 * c[2] + 6.0 * c[3] * t;
        }
        Ok(PathPoint { q, dq, ddq })
    }
}

fn horner(c: &[f64; 4], t: f64) -> f64 {
    c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

/// Second derivatives at the knots with natural end conditions (Thomas algorithm).
fn natural_second_derivatives(h: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let interior = n - 2;
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    for r in 0..interior {
        let i = r + 1;
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i];
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    // forward sweep; sub-diagonal entry of row r is h[r]
    for r in 1..interior {
        let w = h[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    m[interior] = rhs[interior - 1] / diag[interior - 1];
    for r in (0..interior - 1).rev() {
        m[r + 1] = (rhs[r] - upper[r] * m[r + 2]) / diag[r];
    }
    m
}
