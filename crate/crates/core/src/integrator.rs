//! Dormand–Prince 5(4) embedded Runge–Kutta step with a PI step-size controller.

use crate::error::Result;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size controller settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_dt: f64,
    pub min_dt: f64,
}

/// Result of one attempted step.
pub enum Attempt {
    /// Accepted with the new state and the scaled error norm.
    Accepted { y: Vec<f64>, err: f64 },
    /// Rejected by the error test.
    Rejected { err: f64 },
    /// A stage evaluation failed, typically at a non-positive metric.
    StageFailed,
}

/// Integrator state carrying the first-same-as-last stage and PI memory.
pub struct Dp54 {
    pub control: StepControl,
    k: Vec<Vec<f64>>,
    fsal_valid: bool,
    prev_err: f64,
}

impl Dp54 {
    pub fn new(control: StepControl, dim: usize) -> Self {
        Self {
            control,
            k: vec![vec![0.0; dim]; 7],
            fsal_valid: false,
            prev_err: 1e-4,
        }
    }

    /// Forgets the cached first stage, e.g. after the state was modified externally.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    pub fn attempt<F>(&mut self, f: &mut F, t: f64, y: &[f64], dt: f64) -> Attempt
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let dim = y.len();
        if !self.fsal_valid {
            if f(t, y, &mut self.k[0]).is_err() {
                return Attempt::StageFailed;
            }
            self.fsal_valid = true;
        }
        let mut stage = vec![0.0; dim];
        for s in 1..7 {
            stage.copy_from_slice(y);
            for (r, a) in A[s][..s].iter().enumerate() {
                if *a != 0.0 {
                    let c = dt * a;
                    for (st, kv) in stage.iter_mut().zip(&self.k[r]) {
                        *st += c * kv;
                    }
                }
            }
            if f(t + C[s] * dt, &stage, &mut self.k[s]).is_err() {
                return Attempt::StageFailed;
            }
        }
        // stage now holds the fifth-order solution (row 6 of A equals the weights)
        let mut e = vec![0.0; dim];
        for (r, w) in E.iter().enumerate() {
            if *w != 0.0 {
                for (ev, kv) in e.iter_mut().zip(&self.k[r]) {
                    *ev += w * kv;
                }
            }
        }
        let (rtol, atol) = (self.control.rtol, self.control.atol);
        let sum: f64 = e
            .iter()
            .zip(y.iter().zip(&stage))
            .map(|(ev, (a, b))| {
                let q = dt * ev / (atol + rtol * a.abs().max(b.abs()));
                q * q
            })
            .sum();
        let err = (sum / dim.max(1) as f64).sqrt();
        if err.is_finite() && err <= 1.0 && stage.iter().all(|v| v.is_finite()) {
            self.k.swap(0, 6);
            Attempt::Accepted { y: stage, err }
        } else {
            Attempt::Rejected { err }
        }
    }

    /// Next step size after an accepted step.
    pub fn grow(&mut self, dt: f64, err: f64) -> f64 {
        let e = err.max(1e-10);
        let fac = 0.9 * e.powf(-0.7 / 5.0) * self.prev_err.powf(0.4 / 5.0);
        self.prev_err = e;
        (dt * fac.clamp(0.2, 5.0)).min(self.control.max_dt)
    }

    /// Next step size after a rejected step.
    pub fn shrink(&self, dt: f64, err: f64) -> f64 {
        let fac = if err.is_finite() {
            (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
        } else {
            0.1
        };
        dt * fac
    }
}
