//! Rigid-body dynamics `M(q) q̈ + q̇ᵀC(q)q̇ + h(q) = τ` for planar serial
//! chains of revolute joints, plus the path-projected torque coefficients.
//!
//! Joint angles are relative; link `i` points along the absolute angle
//! `θ_i = q_0 + … + q_i` measured from the x-axis of the motion plane. The
//! Coriolis term is assembled from Christoffel symbols of `M`, so the
//! bilinear form `vᵀC(q)w` is available for arbitrary `v`, `w`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::TrackingGains;
use crate::error::{Error, Result};
use crate::geometry::PathSpline;

/// One link of a planar chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// kg
    pub mass: f64,
    /// joint-to-joint length, m
    pub length: f64,
    /// joint-to-centre-of-mass distance, m
    pub com: f64,
    /// rotational inertia about the centre of mass, kg·m²
    pub inertia: f64,
}

/// On-disk robot definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub links: Vec<Link>,
    /// Gravity vector in the frame whose x-y plane is the motion plane.
    pub gravity: [f64; 3],
    pub tau_min: Vec<f64>,
    pub tau_max: Vec<f64>,
}

impl RobotConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<DynamicsModel> {
        DynamicsModel::new(
            self.links.clone(),
            self.gravity,
            DVector::from_vec(self.tau_min.clone()),
            DVector::from_vec(self.tau_max.clone()),
        )
    }
}

/// Per-joint coefficients of `τ = a·s̈ + b·ṡ² + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTriple {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl CoefficientTriple {
    pub fn joint_count(&self) -> usize {
        self.a.len()
    }

    /// Torque produced by path acceleration `u` at squared velocity `x`.
    pub fn torque(&self, u: f64, x: f64) -> DVector<f64> {
        &self.a * u + &self.b * x + &self.c
    }

    /// Largest per-joint 2-norm of the stacked difference `(a−a', b−b', c−c')`.
    pub fn max_row_distance(&self, other: &CoefficientTriple) -> f64 {
        (0..self.joint_count())
            .map(|j| {
                let da = self.a[j] - other.a[j];
                let db = self.b[j] - other.b[j];
                let dc = self.c[j] - other.c[j];
                (da * da + db * db + dc * dc).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.c.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    links: Vec<Link>,
    gravity: [f64; 2],
    tau_min: DVector<f64>,
    tau_max: DVector<f64>,
}

impl DynamicsModel {
    pub fn new(
        links: Vec<Link>,
        gravity: [f64; 3],
        tau_min: DVector<f64>,
        tau_max: DVector<f64>,
    ) -> Result<Self> {
        let n = links.len();
        if n == 0 {
            return Err(Error::InvalidModel("no links".into()));
        }
        for v in [&tau_min, &tau_max] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        // equal bounds model a locked joint; the set computation then
        // reports the path infeasible instead of the model being rejected
        if tau_min.iter().zip(tau_max.iter()).any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidModel("tau_min must not exceed tau_max".into()));
        }
        for l in &links {
            let finite = [l.mass, l.length, l.com, l.inertia].iter().all(|v| v.is_finite());
            if !finite || l.mass < 0.0 || l.inertia < 0.0 || l.mass + l.inertia <= 0.0 {
                return Err(Error::InvalidModel(format!("bad link parameters {l:?}")));
            }
        }
        Ok(Self { links, gravity: [gravity[0], gravity[1]], tau_min, tau_max })
    }

    /// Single link swinging about a fixed pivot.
    pub fn pendulum(link: Link, gravity: [f64; 3], tau_limit: f64) -> Result<Self> {
        Self::new(
            vec![link],
            gravity,
            DVector::from_element(1, -tau_limit),
            DVector::from_element(1, tau_limit),
        )
    }

    /// Two-link planar arm with symmetric torque limits.
    pub fn two_link(links: [Link; 2], gravity: [f64; 3], tau_limit: [f64; 2]) -> Result<Self> {
        Self::new(
            links.to_vec(),
            gravity,
            DVector::from_iterator(2, tau_limit.iter().map(|t| -t)),
            DVector::from_row_slice(&tau_limit),
        )
    }

    pub fn joint_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn tau_min(&self) -> &DVector<f64> {
        &self.tau_min
    }

    pub fn tau_max(&self) -> &DVector<f64> {
        &self.tau_max
    }

    /// Same kinematics with every link mass and inertia multiplied by `factor`.
    pub fn with_mass_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.links {
            l.mass *= factor;
            l.inertia *= factor;
        }
        out
    }

    pub fn with_torque_limits(&self, tau_min: DVector<f64>, tau_max: DVector<f64>) -> Result<Self> {
        Self::new(self.links.clone(), [self.gravity[0], self.gravity[1], 0.0], tau_min, tau_max)
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.joint_count() {
            return Err(Error::DimensionMismatch { expected: self.joint_count(), got: v.len() });
        }
        Ok(())
    }

    fn kinematics(&self, q: &DVector<f64>) -> Kinematics {
        let n = self.joint_count();
        let mut theta = Vec::with_capacity(n);
        let mut acc = 0.0;
        for j in 0..n {
            acc += q[j];
            theta.push(acc);
        }
        Kinematics { sin: theta.iter().map(|t| t.sin()).collect(), cos: theta.iter().map(|t| t.cos()).collect() }
    }

    /// Lever arm of link `k` as seen from the centre of mass of link `i`.
    fn lever(&self, i: usize, k: usize) -> f64 {
        if k == i {
            self.links[i].com
        } else {
            self.links[k].length
        }
    }

    /// `∂r_i/∂q_j`, COM velocity Jacobian column.
    fn com_jacobian(&self, kin: &Kinematics, i: usize, j: usize) -> [f64; 2] {
        if j > i {
            return [0.0, 0.0];
        }
        (j..=i).fold([0.0, 0.0], |acc, k| {
            let l = self.lever(i, k);
            [acc[0] - l * kin.sin[k], acc[1] + l * kin.cos[k]]
        })
    }

    /// `∂²r_i/∂q_j∂q_m`.
    fn com_hessian(&self, kin: &Kinematics, i: usize, j: usize, m: usize) -> [f64; 2] {
        let start = j.max(m);
        if start > i {
            return [0.0, 0.0];
        }
        (start..=i).fold([0.0, 0.0], |acc, k| {
            let l = self.lever(i, k);
            [acc[0] - l * kin.cos[k], acc[1] - l * kin.sin[k]]
        })
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.joint_count();
        let kin = self.kinematics(q);
        let mut m = DMatrix::zeros(n, n);
        for (i, link) in self.links.iter().enumerate() {
            let jac: Vec<[f64; 2]> = (0..n).map(|j| self.com_jacobian(&kin, i, j)).collect();
            for r in 0..=i {
                for c in 0..=i {
                    m[(r, c)] += link.mass * dot(jac[r], jac[c]) + link.inertia;
                }
            }
        }
        m
    }

    /// `∂M/∂q_m` for every `m`.
    fn mass_matrix_partials(&self, kin: &Kinematics) -> Vec<DMatrix<f64>> {
        let n = self.joint_count();
        let mut out = vec![DMatrix::zeros(n, n); n];
        for (i, link) in self.links.iter().enumerate() {
            if link.mass == 0.0 {
                continue;
            }
            let jac: Vec<[f64; 2]> = (0..=i).map(|j| self.com_jacobian(kin, i, j)).collect();
            for (m, dm) in out.iter_mut().enumerate().take(i + 1) {
                for r in 0..=i {
                    let h_rm = self.com_hessian(kin, i, r, m);
                    for c in 0..=i {
                        let h_cm = self.com_hessian(kin, i, c, m);
                        dm[(r, c)] += link.mass * (dot(h_rm, jac[c]) + dot(jac[r], h_cm));
                    }
                }
            }
        }
        out
    }

    /// Bilinear Coriolis/centrifugal form `vᵀC(q)w`, component `k` equal to
    /// `Σ_ij Γ_kij v_i w_j` with Christoffel symbols of the first kind.
    pub fn coriolis(&self, q: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.joint_count();
        let dm = self.mass_matrix_partials(&self.kinematics(q));
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let gamma = 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]);
                    acc += gamma * v[i] * w[j];
                }
            }
            acc
        })
    }

    /// Gravity torques `h(q) = ∂V/∂q`.
    pub fn gravity_torque(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.joint_count();
        let kin = self.kinematics(q);
        DVector::from_fn(n, |j, _| {
            -self
                .links
                .iter()
                .enumerate()
                .map(|(i, link)| link.mass * dot(self.gravity, self.com_jacobian(&kin, i, j)))
                .sum::<f64>()
        })
    }

    /// Total kinetic plus potential energy.
    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let kinetic = 0.5 * qd.dot(&(self.mass_matrix(q) * qd));
        let kin = self.kinematics(q);
        let potential: f64 = self
            .links
            .iter()
            .enumerate()
            .map(|(i, link)| {
                let r = (0..=i).fold([0.0, 0.0], |acc, k| {
                    let l = self.lever(i, k);
                    [acc[0] + l * kin.cos[k], acc[1] + l * kin.sin[k]]
                });
                -link.mass * dot(self.gravity, r)
            })
            .sum();
        kinetic + potential
    }

    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        for v in [q, qd, qdd] {
            self.check_len(v)?;
        }
        Ok(self.mass_matrix(q) * qdd + self.coriolis(q, qd, qd) + self.gravity_torque(q))
    }

    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        tau: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        for v in [q, qd, tau] {
            self.check_len(v)?;
        }
        let rhs = tau - self.coriolis(q, qd, qd) - self.gravity_torque(q);
        let chol = self.mass_matrix(q).cholesky().ok_or(Error::SingularMassMatrix)?;
        Ok(chol.solve(&rhs))
    }

    /// Nominal coefficients along the path: `a = M p'`, `b = M p'' + p'ᵀC p'`, `c = h`.
    pub fn nominal_coefficients(&self, path: &PathSpline, s: f64) -> Result<CoefficientTriple> {
        self.check_path(path)?;
        let pt = path.point(s)?;
        let m = self.mass_matrix(&pt.q);
        Ok(CoefficientTriple {
            a: &m * &pt.dq,
            b: &m * &pt.ddq + self.coriolis(&pt.q, &pt.dq, &pt.dq),
            c: self.gravity_torque(&pt.q),
        })
    }

    /// Coefficients of the computed-torque output as a function of `(s̈, ṡ²)`
    /// when the robot is off the reference by the tracking error
    /// `e = q_d − q`, `ė = q̇_d − q̇`.
    ///
    /// With `q = p − e` and `q̇ = p'ṡ − ė`:
    /// `â = M(q)p'`, `b̂ = M(q)p'' + p'ᵀC(q)p'`,
    /// `ĉ = M(q)(K_p e + K_d ė) − 2ṡ p'ᵀC(q)ė + ėᵀC(q)ė + h(q)`.
    #[allow(clippy::too_many_arguments)]
    pub fn perturbed_coefficients(
        &self,
        path: &PathSpline,
        s: f64,
        sd: f64,
        e: &DVector<f64>,
        ed: &DVector<f64>,
        gains: &TrackingGains,
    ) -> Result<CoefficientTriple> {
        self.check_path(path)?;
        self.check_len(e)?;
        self.check_len(ed)?;
        let pt = path.point(s)?;
        let q = &pt.q - e;
        let m = self.mass_matrix(&q);
        let feedback = gains.kp.component_mul(e) + gains.kd.component_mul(ed);
        Ok(CoefficientTriple {
            a: &m * &pt.dq,
            b: &m * &pt.ddq + self.coriolis(&q, &pt.dq, &pt.dq),
            c: &m * feedback - self.coriolis(&q, &pt.dq, ed) * (2.0 * sd)
                + self.coriolis(&q, ed, ed)
                + self.gravity_torque(&q),
        })
    }

    fn check_path(&self, path: &PathSpline) -> Result<()> {
        if path.joint_count() != self.joint_count() {
            return Err(Error::DimensionMismatch { expected: self.joint_count(), got: path.joint_count() });
        }
        Ok(())
    }
}

struct Kinematics {
    sin: Vec<f64>,
    cos: Vec<f64>,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
