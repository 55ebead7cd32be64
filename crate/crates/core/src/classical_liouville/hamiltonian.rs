//! Phase-space points, scalar fields and the library of Hamiltonians.
//!
//! Points use unified coordinates: the first `k` entries are positions, the
//! next `k` the conjugate momenta.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A point `ω = (q₁…q_k, p₁…p_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpacePoint(Vec<f64>);

impl PhaseSpacePoint {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "phase-space point needs a positive even length, got {}",
                omega.len()
            )));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalDomain(
                "non-finite phase-space coordinate".into(),
            ));
        }
        Ok(Self(omega))
    }

    pub fn from_qp(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        Self::new(q.iter().chain(p).copied().collect())
    }

    pub fn dof(&self) -> usize {
        self.0.len() / 2
    }

    pub fn q(&self) -> &[f64] {
        &self.0[..self.dof()]
    }

    pub fn p(&self) -> &[f64] {
        &self.0[self.dof()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A differentiable function on phase space.
pub trait ScalarField: Send + Sync {
    /// Length of the coordinate vector the field accepts.
    fn dim(&self) -> usize;

    fn value(&self, z: &[f64]) -> f64;

    /// Writes `∂f/∂ω` into `out` (length [`ScalarField::dim`]).
    fn gradient_into(&self, z: &[f64], out: &mut [f64]);

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(z, &mut g);
        g
    }
}

/// A Hamiltonian on a `2k`-dimensional phase space.
pub trait HamiltonianField: ScalarField {
    fn dof(&self) -> usize {
        self.dim() / 2
    }

    fn name(&self) -> String;

    /// `H = T(p) + V(q)`, the precondition for the leapfrog integrator.
    fn is_separable(&self) -> bool;

    fn energy(&self, z: &[f64]) -> f64 {
        self.value(z)
    }
}

/// Closure-backed scalar field. Without an explicit gradient, central
/// differences with step `1e-6·max(1, |ω_i|)` are used.
pub struct FnField<F> {
    dim: usize,
    f: F,
    grad: Option<Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>>,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, grad: None }
    }

    pub fn with_gradient(
        dim: usize,
        f: F,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            f,
            grad: Some(Box::new(grad)),
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        if let Some(g) = &self.grad {
            return g(z, out);
        }
        central_gradient(&self.f, z, out);
    }
}

pub(crate) fn central_gradient(f: &dyn Fn(&[f64]) -> f64, z: &[f64], out: &mut [f64]) {
    let mut x = z.to_vec();
    for i in 0..z.len() {
        let h = 1e-6 * z[i].abs().max(1.0);
        x[i] = z[i] + h;
        let fp = f(&x);
        x[i] = z[i] - h;
        let fm = f(&x);
        x[i] = z[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

/// One-degree-of-freedom systems addressable by id string, e.g.
/// `free_particle(1)`, `harmonic(1,2)`, `quartic(1,0.5)`,
/// `mirror(harmonic(1,1))`.
#[derive(Clone, Debug, PartialEq)]
pub enum LibrarySystem {
    /// `p²/2m`
    FreeParticle { mass: f64 },
    /// `p²/2m + mω²q²/2`
    Harmonic { mass: f64, omega: f64 },
    /// `p²/2m + λq⁴/4`
    Quartic { mass: f64, lambda: f64 },
    /// `−H_inner`, so that paired energies can sum to zero.
    Mirror(Box<LibrarySystem>),
}

impl LibrarySystem {
    pub fn free_particle(mass: f64) -> Result<Self> {
        check_positive("mass", mass)?;
        Ok(Self::FreeParticle { mass })
    }

    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        check_positive("mass", mass)?;
        check_positive("omega", omega)?;
        Ok(Self::Harmonic { mass, omega })
    }

    pub fn quartic(mass: f64, lambda: f64) -> Result<Self> {
        check_positive("mass", mass)?;
        check_positive("lambda", lambda)?;
        Ok(Self::Quartic { mass, lambda })
    }

    pub fn mirror(inner: LibrarySystem) -> Self {
        Self::Mirror(Box::new(inner))
    }

    /// `+1` for a plain system, `−1` for an odd number of mirrors.
    pub fn sign(&self) -> f64 {
        match self {
            Self::Mirror(inner) => -inner.sign(),
            _ => 1.0,
        }
    }

    /// The underlying unmirrored system.
    pub fn base(&self) -> &LibrarySystem {
        match self {
            Self::Mirror(inner) => inner.base(),
            other => other,
        }
    }

    pub fn mass(&self) -> f64 {
        match self.base() {
            Self::FreeParticle { mass }
            | Self::Harmonic { mass, .. }
            | Self::Quartic { mass, .. } => *mass,
            Self::Mirror(_) => unreachable!("base() strips mirrors"),
        }
    }

    /// Potential of the unmirrored base system.
    pub fn base_potential(&self, q: f64) -> f64 {
        match self.base() {
            Self::FreeParticle { .. } => 0.0,
            Self::Harmonic { mass, omega } => 0.5 * mass * omega * omega * q * q,
            Self::Quartic { lambda, .. } => 0.25 * lambda * q.powi(4),
            Self::Mirror(_) => unreachable!(),
        }
    }

    fn base_force_gradient(&self, q: f64) -> f64 {
        match self.base() {
            Self::FreeParticle { .. } => 0.0,
            Self::Harmonic { mass, omega } => mass * omega * omega * q,
            Self::Quartic { lambda, .. } => lambda * q.powi(3),
            Self::Mirror(_) => unreachable!(),
        }
    }

    /// Period of small or exact oscillations where one exists.
    pub fn period(&self) -> Option<f64> {
        match self.base() {
            Self::Harmonic { omega, .. } => Some(2.0 * std::f64::consts::PI / omega),
            _ => None,
        }
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

impl ScalarField for LibrarySystem {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, z: &[f64]) -> f64 {
        let (q, p) = (z[0], z[1]);
        self.sign() * (p * p / (2.0 * self.mass()) + self.base_potential(q))
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let s = self.sign();
        out[0] = s * self.base_force_gradient(z[0]);
        out[1] = s * z[1] / self.mass();
    }
}

impl HamiltonianField for LibrarySystem {
    fn name(&self) -> String {
        self.to_string()
    }

    fn is_separable(&self) -> bool {
        true
    }
}

impl fmt::Display for LibrarySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FreeParticle { mass } => write!(f, "free_particle({mass})"),
            Self::Harmonic { mass, omega } => write!(f, "harmonic({mass},{omega})"),
            Self::Quartic { mass, lambda } => write!(f, "quartic({mass},{lambda})"),
            Self::Mirror(inner) => write!(f, "mirror({inner})"),
        }
    }
}

/// Splits `name(args)` into `(name, args)`; args keep nested parentheses.
pub(crate) fn split_call(s: &str) -> Option<(&str, &str)> {
    let s = s.trim();
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    Some((s[..open].trim(), &s[open + 1..s.len() - 1]))
}

pub(crate) fn parse_numbers(args: &str, id: &str) -> Result<Vec<f64>> {
    if args.trim().is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::UnknownId(id.to_string()))
        })
        .collect()
}

impl FromStr for LibrarySystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s).ok_or_else(|| Error::UnknownId(s.to_string()))?;
        if name == "mirror" {
            return Ok(Self::mirror(args.parse()?));
        }
        let nums = parse_numbers(args, s)?;
        match (name, nums.as_slice()) {
            ("free_particle", [m]) => Self::free_particle(*m),
            ("free_particle", []) => Self::free_particle(1.0),
            ("harmonic", [m, w]) => Self::harmonic(*m, *w),
            ("quartic", [m, l]) => Self::quartic(*m, *l),
            _ => Err(Error::UnknownId(s.to_string())),
        }
    }
}

/// Non-interacting sum of subsystems. Coordinates are
/// `(q of block 1, q of block 2, …, p of block 1, p of block 2, …)`.
pub struct Composite {
    blocks: Vec<Box<dyn HamiltonianField>>,
    offsets: Vec<usize>,
    dof: usize,
}

impl Composite {
    pub fn new(blocks: Vec<Box<dyn HamiltonianField>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter(
                "composite needs at least one block".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dof = 0;
        for b in &blocks {
            offsets.push(dof);
            dof += b.dof();
        }
        Ok(Self {
            blocks,
            offsets,
            dof,
        })
    }

    pub fn blocks(&self) -> &[Box<dyn HamiltonianField>] {
        &self.blocks
    }

    /// Coordinates of block `i`, in that block's own unified layout.
    pub fn block_coordinates(&self, i: usize, z: &[f64]) -> Vec<f64> {
        let k = self.blocks[i].dof();
        let o = self.offsets[i];
        let mut out = Vec::with_capacity(2 * k);
        out.extend_from_slice(&z[o..o + k]);
        out.extend_from_slice(&z[self.dof + o..self.dof + o + k]);
        out
    }

    /// Assembles a full point from per-block points.
    pub fn join(&self, parts: &[&[f64]]) -> Result<Vec<f64>> {
        if parts.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks.len(),
                actual: parts.len(),
            });
        }
        let mut z = vec![0.0; 2 * self.dof];
        for (i, part) in parts.iter().enumerate() {
            let k = self.blocks[i].dof();
            if part.len() != 2 * k {
                return Err(Error::DimensionMismatch {
                    expected: 2 * k,
                    actual: part.len(),
                });
            }
            let o = self.offsets[i];
            z[o..o + k].copy_from_slice(&part[..k]);
            z[self.dof + o..self.dof + o + k].copy_from_slice(&part[k..]);
        }
        Ok(z)
    }
}

impl ScalarField for Composite {
    fn dim(&self) -> usize {
        2 * self.dof
    }

    fn value(&self, z: &[f64]) -> f64 {
        (0..self.blocks.len())
            .map(|i| self.blocks[i].value(&self.block_coordinates(i, z)))
            .sum()
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, block) in self.blocks.iter().enumerate() {
            let k = block.dof();
            let o = self.offsets[i];
            let g = block.gradient(&self.block_coordinates(i, z));
            out[o..o + k].copy_from_slice(&g[..k]);
            out[self.dof + o..self.dof + o + k].copy_from_slice(&g[k..]);
        }
    }
}

impl HamiltonianField for Composite {
    fn name(&self) -> String {
        let names: Vec<String> = self.blocks.iter().map(|b| b.name()).collect();
        format!("composite[{}]", names.join(" + "))
    }

    fn is_separable(&self) -> bool {
        self.blocks.iter().all(|b| b.is_separable())
    }
}

/// A Hamiltonian given by a closure; treated as non-separable unless
/// declared otherwise.
pub struct FnHamiltonian<F> {
    field: FnField<F>,
    name: String,
    separable: bool,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnHamiltonian<F> {
    pub fn new(name: impl Into<String>, dof: usize, f: F, separable: bool) -> Self {
        Self {
            field: FnField::new(2 * dof, f),
            name: name.into(),
            separable,
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn value(&self, z: &[f64]) -> f64 {
        self.field.value(z)
    }
    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        self.field.gradient_into(z, out)
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> HamiltonianField for FnHamiltonian<F> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn is_separable(&self) -> bool {
        self.separable
    }
}
