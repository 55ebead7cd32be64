//! Poisson bracket in unified coordinates and the Liouville residual.

use crate::error::{Error, Result};

use super::flow::flow_in_place;
use super::hamiltonian::{HamiltonianField, ScalarField};

/// `ε = [[0, I], [−I, 0]]` on `ω = (q, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticForm {
    k: usize,
}

impl SymplecticForm {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "need at least one degree of freedom".into(),
            ));
        }
        Ok(Self { k })
    }

    pub fn dof(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn entry(&self, mu: usize, nu: usize) -> f64 {
        let k = self.k;
        if mu < k && nu == mu + k {
            1.0
        } else if mu >= k && nu + k == mu {
            -1.0
        } else {
            0.0
        }
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|mu| (0..self.dim()).map(|nu| self.entry(mu, nu)).collect())
            .collect()
    }

    /// `aᵀ ε b`.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let k = self.k;
        (0..k).map(|i| a[i] * b[k + i] - a[k + i] * b[i]).sum()
    }

    pub fn is_antisymmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| self.entry(i, j) == -self.entry(j, i)))
    }

    /// Whether `ε² = −I` holds exactly.
    pub fn squares_to_minus_identity(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let s: f64 = (0..n).map(|l| self.entry(i, l) * self.entry(l, j)).sum();
                s == if i == j { -1.0 } else { 0.0 }
            })
        })
    }
}

/// `H̃ f = (∇f)ᵀ ε ∇H`, oriented so that `H̃ q = ∂H/∂p` and `H̃ f = df/dt`
/// along Hamilton's equations.
pub fn tilde_apply(h: &dyn ScalarField, f: &dyn ScalarField, z: &[f64]) -> Result<f64> {
    if h.dim() != f.dim() || z.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: if h.dim() != f.dim() { f.dim() } else { z.len() },
        });
    }
    let gh = h.gradient(z);
    let gf = f.gradient(z);
    if gh.iter().chain(&gf).any(|x| !x.is_finite()) {
        return Err(Error::NumericalDomain(format!(
            "non-finite gradient at {z:?}"
        )));
    }
    Ok(SymplecticForm::new(z.len() / 2)?.pair(&gf, &gh))
}

/// A density known at arbitrary phase-space points and times. `None` marks
/// points outside the region where the density is defined.
pub trait DensityEvolution {
    fn dim(&self) -> usize;
    fn density_at(&self, z: &[f64], t: f64) -> Option<f64>;
}

/// Closure-backed density `ρ(z, t)`.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], f64) -> f64> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], f64) -> f64> DensityEvolution for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density_at(&self, z: &[f64], t: f64) -> Option<f64> {
        Some((self.f)(z, t))
    }
}

/// `ρ(z, t) = ρ₀(Φ_{−t} z)`, evaluated by backward integration.
pub struct TransportedDensity<'a, F> {
    h: &'a dyn HamiltonianField,
    rho0: F,
    dt: f64,
}

impl<'a, F: Fn(&[f64]) -> Option<f64>> TransportedDensity<'a, F> {
    pub fn new(h: &'a dyn HamiltonianField, rho0: F, dt: f64) -> Self {
        Self { h, rho0, dt }
    }
}

impl<F: Fn(&[f64]) -> Option<f64>> DensityEvolution for TransportedDensity<'_, F> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn density_at(&self, z: &[f64], t: f64) -> Option<f64> {
        let mut w = z.to_vec();
        flow_in_place(self.h, &mut w, -t, self.dt).ok()?;
        (self.rho0)(&w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleResidual {
    /// `|∂ρ/∂t + H̃ρ|` from central differences.
    pub value: f64,
    pub drho_dt: f64,
    pub tilde_rho: f64,
    /// Some stencil point fell outside the density's support and was
    /// counted as zero.
    pub outside_support: bool,
}

/// Residual of the Liouville equation `∂ρ/∂t = {H, ρ}` at `(z, t)`, using
/// central differences of step `h_step` in both `t` and `z`.
pub fn liouville_residual(
    h: &dyn HamiltonianField,
    rho: &dyn DensityEvolution,
    z: &[f64],
    t: f64,
    h_step: f64,
) -> Result<LiouvilleResidual> {
    if !(h_step > 0.0) || !h_step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "difference step must be positive, got {h_step}"
        )));
    }
    if z.len() != h.dim() || rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: if z.len() != h.dim() {
                z.len()
            } else {
                rho.dim()
            },
        });
    }
    let mut outside = false;
    let mut eval = |w: &[f64], s: f64| {
        rho.density_at(w, s).unwrap_or_else(|| {
            outside = true;
            0.0
        })
    };
    let drho_dt = (eval(z, t + h_step) - eval(z, t - h_step)) / (2.0 * h_step);
    let mut grad = vec![0.0; z.len()];
    let mut w = z.to_vec();
    for i in 0..z.len() {
        w[i] = z[i] + h_step;
        let plus = eval(&w, t);
        w[i] = z[i] - h_step;
        let minus = eval(&w, t);
        w[i] = z[i];
        grad[i] = (plus - minus) / (2.0 * h_step);
    }
    let gh = h.gradient(z);
    if gh.iter().chain(&grad).any(|x| !x.is_finite()) || !drho_dt.is_finite() {
        return Err(Error::NumericalDomain(format!(
            "non-finite derivative at {z:?}"
        )));
    }
    let tilde_rho = SymplecticForm::new(h.dof())?.pair(&grad, &gh);
    Ok(LiouvilleResidual {
        value: (drho_dt + tilde_rho).abs(),
        drho_dt,
        tilde_rho,
        outside_support: outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_liouville::hamiltonian::{FnField, LibrarySystem};

    #[test]
    fn symplectic_form_identities() {
        for k in 1..4 {
            let eps = SymplecticForm::new(k).unwrap();
            assert!(eps.is_antisymmetric());
            assert!(eps.squares_to_minus_identity());
        }
        assert!(SymplecticForm::new(0).is_err());
        assert_eq!(
            SymplecticForm::new(1).unwrap().matrix(),
            vec![vec![0.0, 1.0], vec![-1.0, 0.0]]
        );
    }

    #[test]
    fn bracket_with_position_is_velocity() {
        let h = LibrarySystem::free_particle(1.0).unwrap();
        let q = FnField::new(2, |z: &[f64]| z[0]);
        let p = FnField::new(2, |z: &[f64]| z[1]);
        for z in [[0.0, 1.0], [2.0, -0.7], [-3.0, 4.5]] {
            assert!((tilde_apply(&h, &q, &z).unwrap() - z[1]).abs() < 1e-9);
            assert!(tilde_apply(&h, &p, &z).unwrap().abs() < 1e-9);
            assert_eq!(tilde_apply(&h, &h, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let h = LibrarySystem::free_particle(1.0).unwrap();
        let f = FnField::new(2, |z: &[f64]| z[0].ln());
        assert!(matches!(
            tilde_apply(&h, &f, &[-1.0, 0.0]),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn stationary_and_transported_densities() {
        let h = LibrarySystem::harmonic(1.0, 1.0).unwrap();
        let stationary = FnDensity::new(2, |z: &[f64], _| (-h.energy(z)).exp());
        let frozen = FnDensity::new(2, |z: &[f64], _| {
            (-((z[0] - 1.0).powi(2) + z[1] * z[1]) * 8.0).exp()
        });
        // Exact rotating blob: ρ(z, t) = ρ₀(R(−t) z).
        let rotating = FnDensity::new(2, |z: &[f64], t: f64| {
            let (s, c) = t.sin_cos();
            let (q0, p0) = (z[0] * c - z[1] * s, z[0] * s + z[1] * c);
            (-((q0 - 1.0).powi(2) + p0 * p0) * 8.0).exp()
        });
        let z = [0.9, 0.2];
        assert!(
            liouville_residual(&h, &stationary, &z, 0.3, 1e-4)
                .unwrap()
                .value
                < 1e-6
        );
        assert!(
            liouville_residual(&h, &rotating, &z, 0.0, 1e-4)
                .unwrap()
                .value
                < 1e-6
        );
        assert!(
            liouville_residual(&h, &frozen, &z, 0.0, 1e-4)
                .unwrap()
                .value
                > 1e-2
        );
    }

    #[test]
    fn outside_support_is_flagged() {
        let h = LibrarySystem::free_particle(1.0).unwrap();
        let rho = TransportedDensity::new(&h, |w: &[f64]| (w[0].abs() <= 1.0).then_some(0.5), 0.01);
        let r = liouville_residual(&h, &rho, &[1.0, 0.0], 0.0, 1e-3).unwrap();
        assert!(r.outside_support);
        let r = liouville_residual(&h, &rho, &[0.0, 0.5], 0.2, 1e-3).unwrap();
        assert!(!r.outside_support);
        assert!(r.value < 1e-12);
    }
}
