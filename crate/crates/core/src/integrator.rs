//! Adaptive Dormand–Prince 5(4) integrator with first-same-as-last stages.

use nalgebra::DVector;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of A; these are 5th minus 4th order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Step size carried over between calls.
    h: Option<f64>,
    accepted: usize,
    rejected: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 100_000, h: None, accepted: 0, rejected: 0 }
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Integrates `ẏ = f(t, y)` from `t0` to `t1`.
    pub fn integrate<F>(&mut self, mut f: F, t0: f64, y0: &DVector<f64>, t1: f64) -> Result<DVector<f64>>
    where
        F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(y0.clone());
        }
        if !(span > 0.0) {
            return Err(Error::Integrator(format!("invalid interval [{t0}, {t1}]")));
        }
        let mut t = t0;
        let mut y = y0.clone();
        let mut k0 = f(t, &y);
        let mut h = self.h.unwrap_or_else(|| initial_step(&y, &k0, span, self.rtol, self.atol)).min(span);
        let mut steps = 0;
        while t < t1 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::Integrator(format!("step limit reached at t = {t}")));
            }
            let last = t + h >= t1;
            let h_try = if last { t1 - t } else { h };
            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            k.push(k0.clone());
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    if A[s][j] != 0.0 {
                        ys.axpy(h_try * A[s][j], kj, 1.0);
                    }
                }
                if s == 6 {
                    // FSAL: stage 7 is evaluated at the 5th-order solution
                    let k6 = f(t + h_try, &ys);
                    k.push(k6);
                    let err = error_norm(&y, &ys, &k, h_try, self.rtol, self.atol);
                    if !err.is_finite() {
                        return Err(Error::Integrator(format!("non-finite state at t = {t}")));
                    }
                    if err <= 1.0 {
                        self.accepted += 1;
                        t = if last { t1 } else { t + h_try };
                        y = ys;
                        k0 = k.pop().expect("seven stages");
                        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                        if !last {
                            h = h_try * factor;
                        } else {
                            // keep the free-running step size, not the truncated final one
                            h = h.max(h_try * factor);
                        }
                    } else {
                        self.rejected += 1;
                        h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                    }
                    break;
                }
                let ks = f(t + C[s] * h_try, &ys);
                k.push(ks);
            }
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::Integrator(format!("step size underflow at t = {t}")));
            }
        }
        self.h = Some(h);
        Ok(y)
    }
}

fn error_norm(y0: &DVector<f64>, y1: &DVector<f64>, k: &[DVector<f64>], h: f64, rtol: f64, atol: f64) -> f64 {
    let n = y0.len();
    let mut acc = 0.0;
    for i in 0..n {
        let err: f64 = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
        let scale = atol + rtol * y0[i].abs().max(y1[i].abs());
        acc += (err / scale).powi(2);
    }
    (acc / n.max(1) as f64).sqrt()
}

fn initial_step(y: &DVector<f64>, dy: &DVector<f64>, span: f64, rtol: f64, atol: f64) -> f64 {
    let scale = |i: usize| atol + rtol * y[i].abs();
    let n = y.len().max(1) as f64;
    let d0 = ((0..y.len()).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = ((0..y.len()).map(|i| (dy[i] / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut ode = Dopri5::new(1e-10, 1e-12);
        let y = ode.integrate(|_, y| -y * 2.0, 0.0, &DVector::from_element(1, 1.0), 3.0).unwrap();
        assert!((y[0] - (-6f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_over_many_calls() {
        let mut ode = Dopri5::new(1e-9, 1e-12);
        let mut y = DVector::from_vec(vec![1.0, 0.0]);
        let f = |_: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -y[0]]);
        for k in 0..1000 {
            y = ode.integrate(f, k as f64 * 1e-3, &y, (k + 1) as f64 * 1e-3).unwrap();
        }
        assert!((y[0] - 1f64.cos()).abs() < 1e-8);
        assert!((y[1] + 1f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn quadratic_is_exact() {
        let mut ode = Dopri5::new(1e-8, 1e-10);
        let y = ode.integrate(|_, y| DVector::from_vec(vec![y[1], -3.0]), 0.0, &DVector::from_vec(vec![0.5, 2.0]), 0.7).unwrap();
        assert!((y[0] - (0.5 + 2.0 * 0.7 - 1.5 * 0.49)).abs() < 1e-13);
    }

    #[test]
    fn rejects_backward_interval() {
        let mut ode = Dopri5::new(1e-8, 1e-10);
        assert!(ode.integrate(|_, y| y.clone(), 1.0, &DVector::from_element(1, 1.0), 0.0).is_err());
    }
}
