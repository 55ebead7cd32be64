//! Störmer–Verlet (leapfrog) flow for separable Hamiltonians.

use crate::error::{Error, Result};

use super::hamiltonian::{HamiltonianField, PhaseSpacePoint};

/// Kick–drift–kick stepper. The position gradient from the closing kick is
/// reused for the next opening kick, so each step costs two gradient
/// evaluations.
pub struct Leapfrog<'a> {
    h: &'a dyn HamiltonianField,
    step: f64,
    grad: Vec<f64>,
    force_cached: bool,
}

impl<'a> Leapfrog<'a> {
    pub fn new(h: &'a dyn HamiltonianField, step: f64) -> Result<Self> {
        if !h.is_separable() {
            return Err(Error::UnsupportedSystem(format!(
                "{} is not separable; leapfrog needs H = T(p) + V(q)",
                h.name()
            )));
        }
        if step == 0.0 || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step must be finite and non-zero, got {step}"
            )));
        }
        Ok(Self {
            h,
            step,
            grad: vec![0.0; h.dim()],
            force_cached: false,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Advances `z` in place by one step.
    pub fn step(&mut self, z: &mut [f64]) {
        let k = self.h.dof();
        let half = 0.5 * self.step;
        if !self.force_cached {
            self.h.gradient_into(z, &mut self.grad);
        }
        for i in 0..k {
            z[k + i] -= half * self.grad[i];
        }
        self.h.gradient_into(z, &mut self.grad);
        for i in 0..k {
            z[i] += self.step * self.grad[k + i];
        }
        self.h.gradient_into(z, &mut self.grad);
        for i in 0..k {
            z[k + i] -= half * self.grad[i];
        }
        self.force_cached = true;
    }

    /// Forget the cached force, e.g. after `z` was modified externally.
    pub fn reset(&mut self) {
        self.force_cached = false;
    }
}

/// Number of steps and the actual step size used to cover `t` with steps no
/// longer than `dt`.
pub fn step_plan(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t must be finite, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok((0, 0.0));
    }
    let ratio = t.abs() / dt;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    let n = (n as usize).max(1);
    Ok((n, t / n as f64))
}

fn check_point(h: &dyn HamiltonianField, z: &[f64]) -> Result<()> {
    if z.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: z.len(),
        });
    }
    Ok(())
}

/// Flow `Φ_t(z₀)` of Hamilton's equations `dq/dt = ∂H/∂p`, `dp/dt = −∂H/∂q`.
pub fn flow_map(
    h: &dyn HamiltonianField,
    z0: &PhaseSpacePoint,
    t: f64,
    dt: f64,
) -> Result<PhaseSpacePoint> {
    let mut z = z0.as_slice().to_vec();
    flow_in_place(h, &mut z, t, dt)?;
    PhaseSpacePoint::new(z)
}

/// Slice version of [`flow_map`] used by the density transport.
pub fn flow_in_place(h: &dyn HamiltonianField, z: &mut [f64], t: f64, dt: f64) -> Result<()> {
    check_point(h, z)?;
    let (n, step) = step_plan(t, dt)?;
    if n == 0 {
        if !h.is_separable() {
            return Err(Error::UnsupportedSystem(h.name()));
        }
        return Ok(());
    }
    let mut lf = Leapfrog::new(h, step)?;
    for _ in 0..n {
        lf.step(z);
    }
    Ok(())
}

/// Iterator over `(time, point)` along a leapfrog trajectory, starting with
/// the initial point.
pub struct Trajectory<'a> {
    stepper: Leapfrog<'a>,
    z: Vec<f64>,
    index: usize,
    steps: usize,
}

impl Iterator for Trajectory<'_> {
    type Item = (f64, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.index > self.steps {
            return None;
        }
        if self.index > 0 {
            self.stepper.step(&mut self.z);
        }
        let t = self.index as f64 * self.stepper.step_size();
        self.index += 1;
        Some((t, self.z.clone()))
    }
}

pub fn trajectory<'a>(
    h: &'a dyn HamiltonianField,
    z0: &PhaseSpacePoint,
    t: f64,
    dt: f64,
) -> Result<Trajectory<'a>> {
    check_point(h, z0.as_slice())?;
    let (n, step) = step_plan(t, dt)?;
    let step = if n == 0 { dt } else { step };
    Ok(Trajectory {
        stepper: Leapfrog::new(h, step)?,
        z: z0.as_slice().to_vec(),
        index: 0,
        steps: n,
    })
}

/// `max_n |H(z_n) − H(z_0)|` along the leapfrog trajectory.
pub fn energy_drift(
    h: &dyn HamiltonianField,
    z0: &PhaseSpacePoint,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let e0 = h.energy(z0.as_slice());
    Ok(trajectory(h, z0, t, dt)?
        .map(|(_, z)| (h.energy(&z) - e0).abs())
        .fold(0.0, f64::max))
}

/// Jacobian `∂Φ_t/∂z₀` by central differences with step `eps`.
pub fn flow_jacobian(
    h: &dyn HamiltonianField,
    z0: &PhaseSpacePoint,
    t: f64,
    dt: f64,
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = z0.as_slice().len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut plus = z0.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[j] += eps;
        minus[j] -= eps;
        flow_in_place(h, &mut plus, t, dt)?;
        flow_in_place(h, &mut minus, t, dt)?;
        for i in 0..n {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    det
}
