//! Phase-space densities as weighted samples or cell-centred grids.
//!
//! Samples are the transport representation: each point follows its
//! characteristic exactly. Pointwise values, distances and entropies of a
//! sample density come from a Gaussian kernel estimate whose bandwidth is
//! [`SampleDensity::bandwidth`].

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::flow::flow_in_place;
use super::hamiltonian::HamiltonianField;

/// Kernel support in units of the bandwidth.
pub const KERNEL_CUTOFF: f64 = 4.0;
/// Rendered grids use this many cells per bandwidth.
const CELLS_PER_BANDWIDTH: f64 = 2.0;
const MAX_RENDER_CELLS: usize = 1 << 23;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "bounding box needs finite lower < upper on every axis, got {lower:?} / {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.min(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|a| a - margin).collect(),
            upper: self.upper.iter().map(|b| b + margin).collect(),
        }
    }

    /// Whether the two boxes are further apart than `gap` along some axis.
    pub fn separated_by(&self, other: &Self, gap: f64) -> bool {
        (0..self.dim())
            .any(|i| other.lower[i] - self.upper[i] > gap || self.lower[i] - other.upper[i] > gap)
    }
}

/// Geometry of a cell-centred grid. Cells are stored row-major with the last
/// axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    bounds: BoundingBox,
    shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(bounds: BoundingBox, shape: Vec<usize>) -> Result<Self> {
        if shape.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                actual: shape.len(),
            });
        }
        if shape.contains(&0) {
            return Err(Error::InvalidParameter(
                "grid shape entries must be positive".into(),
            ));
        }
        Ok(Self { bounds, shape })
    }

    /// Smallest grid of (at most) the given spacing covering `bounds`.
    pub fn covering(bounds: &BoundingBox, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        let shape: Vec<usize> = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(a, b)| ((b - a) / spacing).ceil().max(1.0) as usize)
            .collect();
        let cells = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        if cells.is_none_or(|c| c > MAX_RENDER_CELLS) {
            return Err(Error::InvalidParameter(format!(
                "grid of shape {shape:?} exceeds {MAX_RENDER_CELLS} cells"
            )));
        }
        let upper = bounds
            .lower
            .iter()
            .zip(&shape)
            .map(|(a, &n)| a + n as f64 * spacing)
            .collect();
        Self::new(BoundingBox::new(bounds.lower.clone(), upper)?, shape)
    }

    pub fn bounds(&self) -> &BoundingBox {
        &self.bounds
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.bounds.upper[axis] - self.bounds.lower[axis]) / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Coordinate of the `i`-th cell centre along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.bounds.lower[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            z[axis] = self.coordinate(axis, rem % n);
            rem /= n;
        }
        z
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (i, n)| acc * n + i)
    }
}

/// Weighted point cloud in `2k`-dimensional phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDensity {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SampleDensity {
    /// `points` is flat, `dim` entries per sample.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "phase-space dimension must be even, got {dim}"
            )));
        }
        if weights.is_empty() {
            return Err(Error::EmptySupport);
        }
        if points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                actual: points.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "sample coordinates must be finite".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "sample weights must be finite and non-negative".into(),
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(dim, points.concat(), weights)
    }

    /// `n` equally weighted draws from an axis-aligned Gaussian.
    pub fn gaussian<R: Rng + ?Sized>(
        mean: &[f64],
        sigma: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if mean.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: sigma.len(),
            });
        }
        if n == 0 {
            return Err(Error::EmptySupport);
        }
        let normals = sigma
            .iter()
            .map(|&s| {
                Normal::new(0.0, s).map_err(|e| Error::InvalidParameter(format!("sigma {s}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut points = Vec::with_capacity(n * mean.len());
        for _ in 0..n {
            for (m, normal) in mean.iter().zip(&normals) {
                points.push(m + normal.sample(rng));
            }
        }
        Self::new(mean.len(), points, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        Self {
            dim: self.dim,
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w / m).collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let m = self.total_mass();
        let mut mean = vec![0.0; self.dim];
        for (z, w) in self.points().zip(&self.weights) {
            for (acc, x) in mean.iter_mut().zip(z) {
                *acc += w * x;
            }
        }
        mean.iter_mut().for_each(|x| *x /= m);
        mean
    }

    /// Root of the axis-averaged weighted variance.
    pub fn rms_spread(&self) -> f64 {
        let mean = self.mean();
        let m = self.total_mass();
        let mut var = 0.0;
        for (z, w) in self.points().zip(&self.weights) {
            var += w * z
                .iter()
                .zip(&mean)
                .map(|(x, mu)| (x - mu).powi(2))
                .sum::<f64>();
        }
        (var / (m * self.dim as f64)).sqrt()
    }

    /// Isotropic kernel bandwidth: a tenth of the RMS spread, with a small
    /// floor so single points and coincident clouds stay renderable.
    pub fn bandwidth(&self) -> f64 {
        let spread = self.rms_spread();
        let scale = self.points.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        (0.1 * spread).max(1e-6 * scale)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let mut lower = vec![f64::INFINITY; self.dim];
        let mut upper = vec![f64::NEG_INFINITY; self.dim];
        for z in self.points() {
            for i in 0..self.dim {
                lower[i] = lower[i].min(z[i]);
                upper[i] = upper[i].max(z[i]);
            }
        }
        BoundingBox { lower, upper }
    }

    /// Kernel estimate at `z` (unnormalized weights are honoured).
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let b = self.bandwidth();
        let cut = KERNEL_CUTOFF * b;
        let norm = (b * (2.0 * PI).sqrt()).powi(self.dim as i32);
        let mut acc = 0.0;
        for (x, w) in self.points().zip(&self.weights) {
            let mut r2 = 0.0;
            let mut inside = true;
            for (a, c) in x.iter().zip(z) {
                let d = a - c;
                if d.abs() > cut {
                    inside = false;
                    break;
                }
                r2 += d * d;
            }
            if inside {
                acc += w * (-0.5 * r2 / (b * b)).exp();
            }
        }
        acc / norm
    }

    /// Deposits the kernel estimate onto `spec`, adding to `out`.
    fn render_into(&self, spec: &GridSpec, out: &mut [f64]) {
        let b = self.bandwidth();
        let cut = KERNEL_CUTOFF * b;
        let norm = 1.0 / (b * (2.0 * PI).sqrt());
        let dim = self.dim;
        let mut ranges: Vec<(usize, Vec<f64>)> = vec![(0, Vec::new()); dim];
        let mut idx = vec![0usize; dim];
        for (z, &w) in self.points().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let mut empty = false;
            for axis in 0..dim {
                let h = spec.spacing(axis);
                let lo = spec.bounds.lower[axis];
                let first = (((z[axis] - cut - lo) / h) - 0.5).ceil().max(0.0) as usize;
                let last_f = ((z[axis] + cut - lo) / h - 0.5).floor();
                if last_f < 0.0 || first >= spec.shape[axis] {
                    empty = true;
                    break;
                }
                let last = (last_f as usize).min(spec.shape[axis] - 1);
                let weights = (first..=last)
                    .map(|i| {
                        let u = (spec.coordinate(axis, i) - z[axis]) / b;
                        norm * (-0.5 * u * u).exp()
                    })
                    .collect();
                ranges[axis] = (first, weights);
            }
            if empty || ranges.iter().any(|(_, ws)| ws.is_empty()) {
                continue;
            }
            // Odometer over the tensor-product stencil.
            let mut pos = vec![0usize; dim];
            'stencil: loop {
                let mut v = w;
                for axis in 0..dim {
                    idx[axis] = ranges[axis].0 + pos[axis];
                    v *= ranges[axis].1[pos[axis]];
                }
                out[spec.flat_index(&idx)] += v;
                let mut axis = dim;
                loop {
                    if axis == 0 {
                        break 'stencil;
                    }
                    axis -= 1;
                    pos[axis] += 1;
                    if pos[axis] < ranges[axis].1.len() {
                        break;
                    }
                    pos[axis] = 0;
                }
            }
        }
    }
}

/// Density values (not masses) at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if spec.dim() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "phase-space dimension must be even, got {}",
                spec.dim()
            )));
        }
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "grid values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at cell centres. The result is not normalized.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.center(i))).collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v / m).collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        let mut mass = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            for (acc, x) in mean.iter_mut().zip(self.spec.center(i)) {
                *acc += v * x;
            }
            mass += v;
        }
        mean.iter_mut().for_each(|x| *x /= mass);
        mean
    }

    /// Multilinear interpolation between cell centres; constant extrapolation
    /// up to the box edge and zero outside it.
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        let spec = &self.spec;
        if !spec.bounds.contains(z) {
            return 0.0;
        }
        let dim = spec.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for axis in 0..dim {
            let n = spec.shape[axis];
            let u = (z[axis] - spec.bounds.lower[axis]) / spec.spacing(axis) - 0.5;
            if n == 1 || u <= 0.0 {
                base[axis] = 0;
                frac[axis] = 0.0;
            } else if u >= (n - 1) as f64 {
                base[axis] = n - 2;
                frac[axis] = 1.0;
            } else {
                base[axis] = u.floor() as usize;
                frac[axis] = u - u.floor();
            }
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; dim];
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            for axis in 0..dim {
                let up = (corner >> axis) & 1 == 1;
                if up && spec.shape[axis] == 1 {
                    w = 0.0;
                    break;
                }
                idx[axis] = base[axis] + usize::from(up);
                w *= if up { frac[axis] } else { 1.0 - frac[axis] };
            }
            if w != 0.0 {
                acc += w * self.values[spec.flat_index(&idx)];
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSpaceDensity {
    Samples(SampleDensity),
    Grid(GridDensity),
}

impl From<SampleDensity> for PhaseSpaceDensity {
    fn from(s: SampleDensity) -> Self {
        Self::Samples(s)
    }
}

impl From<GridDensity> for PhaseSpaceDensity {
    fn from(g: GridDensity) -> Self {
        Self::Grid(g)
    }
}

impl PhaseSpaceDensity {
    pub fn dim(&self) -> usize {
        match self {
            Self::Samples(s) => s.dim(),
            Self::Grid(g) => g.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Samples(s) => s.total_mass(),
            Self::Grid(g) => g.total_mass(),
        }
    }

    pub fn normalized(&self) -> Self {
        match self {
            Self::Samples(s) => Self::Samples(s.normalized()),
            Self::Grid(g) => Self::Grid(g.normalized()),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Samples(s) => s.mean(),
            Self::Grid(g) => g.mean(),
        }
    }

    pub fn evaluate(&self, z: &[f64]) -> f64 {
        match self {
            Self::Samples(s) => s.evaluate(z),
            Self::Grid(g) => g.evaluate(z),
        }
    }

    /// Kernel bandwidth for samples, `None` for grids.
    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            Self::Samples(s) => Some(s.bandwidth()),
            Self::Grid(_) => None,
        }
    }

    /// Box outside which the density is zero.
    pub fn support(&self) -> BoundingBox {
        match self {
            Self::Samples(s) => s.bounding_box().expanded(KERNEL_CUTOFF * s.bandwidth()),
            Self::Grid(g) => g.spec.bounds.clone(),
        }
    }

    /// Finest natural resolution of the representation.
    fn resolution(&self) -> f64 {
        match self {
            Self::Samples(s) => s.bandwidth() / CELLS_PER_BANDWIDTH,
            Self::Grid(g) => (0..g.dim())
                .map(|a| g.spec.spacing(a))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Density values at the cell centres of `spec`.
    pub fn render(&self, spec: &GridSpec) -> Result<Vec<f64>> {
        if spec.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: spec.dim(),
            });
        }
        match self {
            Self::Samples(s) => {
                let mut out = vec![0.0; spec.len()];
                s.render_into(spec, &mut out);
                Ok(out)
            }
            Self::Grid(g) if g.spec == *spec => Ok(g.values.clone()),
            Self::Grid(g) => Ok((0..spec.len())
                .map(|i| g.evaluate(&spec.center(i)))
                .collect()),
        }
    }

    /// The representation as a grid: the kernel estimate for samples.
    pub fn to_grid(&self) -> Result<GridDensity> {
        match self {
            Self::Grid(g) => Ok(g.clone()),
            Self::Samples(_) => {
                let spec = GridSpec::covering(&self.support(), self.resolution())?;
                let values = self.render(&spec)?;
                GridDensity::new(spec, values)
            }
        }
    }

    /// Weighted sum `Σ c_i ρ_i`. Sample mixtures stay samples; anything else
    /// is rendered on a common grid.
    pub fn mixture(parts: &[(f64, &PhaseSpaceDensity)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptySupport)?.1;
        let dim = first.dim();
        for (c, p) in parts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mixture coefficient {c} must be non-negative"
                )));
            }
        }
        if parts.iter().all(|(_, p)| matches!(p, Self::Samples(_))) {
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (c, p) in parts {
                if let Self::Samples(s) = p {
                    if *c == 0.0 {
                        continue;
                    }
                    points.extend_from_slice(&s.points);
                    weights.extend(s.weights.iter().map(|w| c * w));
                }
            }
            return Ok(Self::Samples(SampleDensity::new(dim, points, weights)?));
        }
        let spec = common_grid(&parts.iter().map(|(_, p)| *p).collect::<Vec<_>>())?;
        let mut values = vec![0.0; spec.len()];
        for (c, p) in parts {
            for (acc, v) in values.iter_mut().zip(p.render(&spec)?) {
                *acc += c * v;
            }
        }
        Ok(Self::Grid(GridDensity::new(spec, values)?))
    }
}

/// Grid covering every density's support at the finest of their resolutions.
pub fn common_grid(densities: &[&PhaseSpaceDensity]) -> Result<GridSpec> {
    let first = densities.first().ok_or(Error::EmptySupport)?;
    let mut bounds = first.support();
    let mut spacing = first.resolution();
    for d in &densities[1..] {
        if d.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                actual: d.dim(),
            });
        }
        bounds = bounds.union(&d.support());
        spacing = spacing.min(d.resolution());
    }
    GridSpec::covering(&bounds, spacing)
}

/// Grid shared by two densities; identical grids are used as they are.
fn pair_grid(a: &PhaseSpaceDensity, b: &PhaseSpaceDensity) -> Result<GridSpec> {
    match (a, b) {
        (PhaseSpaceDensity::Grid(ga), PhaseSpaceDensity::Grid(gb)) if ga.spec == gb.spec => {
            Ok(ga.spec.clone())
        }
        _ => common_grid(&[a, b]),
    }
}

/// `∫|ρ_a − ρ_b|` on a common grid.
pub fn l1_distance(a: &PhaseSpaceDensity, b: &PhaseSpaceDensity) -> Result<f64> {
    let spec = pair_grid(a, b)?;
    let va = a.render(&spec)?;
    let vb = b.render(&spec)?;
    Ok(va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum::<f64>() * spec.cell_volume())
}

/// Overlap integral `∫ρ_a ρ_b`. For two sample densities the Gaussian
/// kernels are integrated in closed form.
pub fn overlap(a: &PhaseSpaceDensity, b: &PhaseSpaceDensity) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    match (a, b) {
        (PhaseSpaceDensity::Samples(sa), PhaseSpaceDensity::Samples(sb)) => {
            Ok(sample_overlap(sa, sb))
        }
        _ => {
            if a.support().separated_by(&b.support(), 0.0) {
                return Ok(0.0);
            }
            let spec = pair_grid(a, b)?;
            let va = a.render(&spec)?;
            let vb = b.render(&spec)?;
            Ok(va.iter().zip(&vb).map(|(x, y)| x * y).sum::<f64>() * spec.cell_volume())
        }
    }
}

fn sample_overlap(a: &SampleDensity, b: &SampleDensity) -> f64 {
    // ∫ φ_{b1}(z − x) φ_{b2}(z − y) dz = φ_s(x − y) with s² = b1² + b2².
    let s2 = a.bandwidth().powi(2) + b.bandwidth().powi(2);
    let s = s2.sqrt();
    // exp(−r²/2s²) < 1e−28 beyond this distance per axis.
    let cut = 11.5 * s;
    if a.bounding_box().separated_by(&b.bounding_box(), cut) {
        return 0.0;
    }
    let norm = (2.0 * PI * s2).powf(a.dim as f64 / 2.0);
    let mut acc = 0.0;
    for (x, wx) in a.points().zip(&a.weights) {
        let mut row = 0.0;
        for (y, wy) in b.points().zip(&b.weights) {
            let mut r2 = 0.0;
            let mut far = false;
            for (p, q) in x.iter().zip(y) {
                let d = p - q;
                if d.abs() > cut {
                    far = true;
                    break;
                }
                r2 += d * d;
            }
            if !far {
                row += wy * (-0.5 * r2 / s2).exp();
            }
        }
        acc += wx * row;
    }
    acc / norm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mixedness {
    /// Differential entropy `−∫ρ ln ρ` in nats.
    pub entropy: f64,
    /// Rényi-2 entropy `−ln ∫ρ²`.
    pub renyi2: f64,
    /// Kernel bandwidth used for sample densities.
    pub bandwidth: Option<f64>,
}

/// Entropies of a normalized density, from its grid or kernel rendering.
pub fn mixedness(rho: &PhaseSpaceDensity) -> Result<Mixedness> {
    let grid = rho.to_grid()?;
    let vol = grid.spec.cell_volume();
    let mass = grid.values.iter().sum::<f64>() * vol;
    if !(mass > 0.0) {
        return Err(Error::EmptySupport);
    }
    let mut entropy = 0.0;
    let mut purity = 0.0;
    for &v in &grid.values {
        let v = v / mass;
        if v > 0.0 {
            entropy -= v * v.ln();
            purity += v * v;
        }
    }
    Ok(Mixedness {
        entropy: entropy * vol,
        renyi2: -(purity * vol).ln(),
        bandwidth: rho.bandwidth(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct PropagationOptions {
    /// Region outside which transported mass counts as escaped.
    pub bounds: Option<BoundingBox>,
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub density: PhaseSpaceDensity,
    /// Fraction of the mass that left `bounds` (samples) or the mass defect
    /// removed by renormalization (grids).
    pub escaped_mass: f64,
}

/// Transports `rho0` forward along the flow of `h` for time `t`.
pub fn propagate_density(
    h: &dyn HamiltonianField,
    rho0: &PhaseSpaceDensity,
    t: f64,
    dt: f64,
) -> Result<Propagation> {
    propagate_density_with(h, rho0, t, dt, &PropagationOptions::default())
}

pub fn propagate_density_with(
    h: &dyn HamiltonianField,
    rho0: &PhaseSpaceDensity,
    t: f64,
    dt: f64,
    opts: &PropagationOptions,
) -> Result<Propagation> {
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: rho0.dim(),
        });
    }
    if let Some(b) = &opts.bounds {
        if b.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                actual: b.dim(),
            });
        }
    }
    let prop = match rho0 {
        PhaseSpaceDensity::Samples(s) => {
            let mut points = s.points.clone();
            for z in points.chunks_exact_mut(s.dim) {
                flow_in_place(h, z, t, dt)?;
            }
            let out = SampleDensity {
                dim: s.dim,
                points,
                weights: s.weights.clone(),
            };
            let escaped = match &opts.bounds {
                Some(b) => {
                    out.points()
                        .zip(&out.weights)
                        .filter(|(z, _)| !b.contains(z))
                        .map(|(_, w)| w)
                        .sum::<f64>()
                        / out.total_mass()
                }
                None => 0.0,
            };
            Propagation {
                density: PhaseSpaceDensity::Samples(out),
                escaped_mass: escaped,
            }
        }
        PhaseSpaceDensity::Grid(g) => {
            let spec = g.spec.clone();
            let mut values = Vec::with_capacity(spec.len());
            for i in 0..spec.len() {
                let mut z = spec.center(i);
                flow_in_place(h, &mut z, -t, dt)?;
                values.push(g.evaluate(&z));
            }
            let before = g.total_mass();
            let after = values.iter().sum::<f64>() * spec.cell_volume();
            if !(after > 0.0) {
                return Err(Error::EmptySupport);
            }
            let scale = before / after;
            values.iter_mut().for_each(|v| *v *= scale);
            Propagation {
                density: PhaseSpaceDensity::Grid(GridDensity::new(spec, values)?),
                escaped_mass: 1.0 - after / before,
            }
        }
    };
    if prop.escaped_mass.abs() > 1e-9 {
        log::warn!(
            "propagation over t = {t} lost {:.3e} of the mass outside the domain",
            prop.escaped_mass
        );
    }
    Ok(prop)
}

fn axis_names(dim: usize) -> Vec<String> {
    let k = dim / 2;
    (1..=k)
        .map(|i| format!("q{i}"))
        .chain((1..=k).map(|i| format!("p{i}")))
        .collect()
}

/// Writes samples as `q1..qk,p1..pk,weight` rows with a header.
pub fn write_samples_csv<W: Write>(s: &SampleDensity, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = axis_names(s.dim);
    header.push("weight".into());
    wtr.write_record(&header)?;
    for (z, wt) in s.points().zip(&s.weights) {
        wtr.write_record(z.iter().chain(std::iter::once(wt)).map(|x| x.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<SampleDensity> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let cols = rdr.headers()?.len();
    if cols < 3 || cols % 2 == 0 {
        return Err(Error::Parse(format!(
            "sample CSV needs 2k coordinate columns plus weight, found {cols} columns"
        )));
    }
    let dim = cols - 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, row) in rdr.deserialize::<Vec<f64>>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("sample row {}: {e}", i + 1)))?;
        points.extend_from_slice(&row[..dim]);
        weights.push(row[dim]);
    }
    SampleDensity::new(dim, points, weights)
}

/// Writes a grid: `lower`, `upper` and `shape` header rows, a column header,
/// then one `centre..., value` row per cell.
pub fn write_grid_csv<W: Write>(g: &GridDensity, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let spec = &g.spec;
    let row = |tag: &str, xs: Vec<String>| {
        std::iter::once(tag.to_string())
            .chain(xs)
            .collect::<Vec<_>>()
    };
    wtr.write_record(row(
        "lower",
        spec.bounds.lower.iter().map(f64::to_string).collect(),
    ))?;
    wtr.write_record(row(
        "upper",
        spec.bounds.upper.iter().map(f64::to_string).collect(),
    ))?;
    wtr.write_record(row(
        "shape",
        spec.shape.iter().map(usize::to_string).collect(),
    ))?;
    let mut header = axis_names(spec.dim());
    header.push("value".into());
    wtr.write_record(&header)?;
    for (i, v) in g.values.iter().enumerate() {
        wtr.write_record(
            spec.center(i)
                .iter()
                .chain(std::iter::once(v))
                .map(|x| x.to_string()),
        )?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(r: R) -> Result<GridDensity> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut records = rdr.records();
    let mut tagged = |tag: &str| -> Result<Vec<String>> {
        let rec = records
            .next()
            .ok_or_else(|| Error::Parse(format!("grid CSV: missing `{tag}` row")))??;
        if rec.get(0) != Some(tag) {
            return Err(Error::Parse(format!(
                "grid CSV: expected `{tag}` row, found {:?}",
                rec.get(0)
            )));
        }
        Ok(rec.iter().skip(1).map(str::to_string).collect())
    };
    let parse_f = |xs: Vec<String>| -> Result<Vec<f64>> {
        xs.iter()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("grid CSV: {x}: {e}")))
            })
            .collect()
    };
    let lower = parse_f(tagged("lower")?)?;
    let upper = parse_f(tagged("upper")?)?;
    let shape = tagged("shape")?
        .iter()
        .map(|x| {
            x.parse::<usize>()
                .map_err(|e| Error::Parse(format!("grid CSV: {x}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = GridSpec::new(BoundingBox::new(lower, upper)?, shape)?;
    records
        .next()
        .ok_or_else(|| Error::Parse("grid CSV: missing column header".into()))??;
    let dim = spec.dim();
    let mut values = Vec::with_capacity(spec.len());
    for rec in records {
        let rec = rec?;
        let v = rec
            .get(dim)
            .ok_or_else(|| Error::Parse(format!("grid CSV: short row {rec:?}")))?;
        values.push(
            v.parse::<f64>()
                .map_err(|e| Error::Parse(format!("grid CSV: {v}: {e}")))?,
        );
    }
    GridDensity::new(spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_liouville::hamiltonian::LibrarySystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, FRAC_PI_2};

    fn blob(center: [f64; 2], sigma: f64, n: usize, seed: u64) -> PhaseSpaceDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleDensity::gaussian(&center, &[sigma, sigma], n, &mut rng)
            .unwrap()
            .into()
    }

    fn unit_box_grid(n: usize) -> GridDensity {
        let spec = GridSpec::new(
            BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            vec![n, n],
        )
        .unwrap();
        GridDensity::from_fn(spec, |_| 1.0).unwrap()
    }

    #[test]
    fn sample_validation() {
        assert!(SampleDensity::new(3, vec![0.0; 3], vec![1.0]).is_err());
        assert!(SampleDensity::new(2, vec![0.0; 2], vec![-1.0]).is_err());
        assert!(SampleDensity::new(2, vec![f64::NAN, 0.0], vec![1.0]).is_err());
        assert_eq!(
            SampleDensity::new(2, vec![], vec![]),
            Err(Error::EmptySupport)
        );
        assert!(SampleDensity::new(2, vec![0.0; 4], vec![1.0]).is_err());
    }

    #[test]
    fn identity_propagation() {
        let h = LibrarySystem::harmonic(1.0, 1.0).unwrap();
        let rho = blob([1.0, 0.0], 0.1, 200, 1);
        let out = propagate_density(&h, &rho, 0.0, 1e-3).unwrap();
        assert_eq!(out.density, rho);
        assert_eq!(out.escaped_mass, 0.0);
    }

    #[test]
    fn harmonic_quarter_turn_moves_center() {
        let h = LibrarySystem::harmonic(1.0, 1.0).unwrap();
        let rho = blob([1.0, 0.0], 0.1, 500, 2);
        let start = rho.mean();
        let out = propagate_density(&h, &rho, FRAC_PI_2, 1e-3).unwrap();
        let c = out.density.mean();
        // Rotation oracle applied to the sample mean.
        assert!((c[0] - start[1]).abs() < 1e-4);
        assert!((c[1] + start[0]).abs() < 1e-4);
        assert!((out.density.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_particle_translates_blob() {
        let h = LibrarySystem::free_particle(1.0).unwrap();
        let rho = blob([0.0, 1.0], 0.05, 300, 3);
        let start = rho.mean();
        let c = propagate_density(&h, &rho, 2.0, 1e-2)
            .unwrap()
            .density
            .mean();
        assert!((c[0] - (start[0] + 2.0 * start[1])).abs() < 1e-12);
        assert!((c[1] - start[1]).abs() < 1e-15);
    }

    #[test]
    fn escaped_mass_is_reported() {
        let h = LibrarySystem::free_particle(1.0).unwrap();
        let rho = blob([0.0, 1.0], 0.05, 100, 4);
        let opts = PropagationOptions {
            bounds: Some(BoundingBox::new(vec![-1.0, -5.0], vec![1.0, 5.0]).unwrap()),
        };
        let out = propagate_density_with(&h, &rho, 5.0, 0.1, &opts).unwrap();
        assert!((out.escaped_mass - 1.0).abs() < 1e-12);
        assert!((out.density.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_propagation_tracks_rotation() {
        let h = LibrarySystem::harmonic(1.0, 1.0).unwrap();
        let spec = GridSpec::covering(
            &BoundingBox::new(vec![-2.5, -2.5], vec![2.5, 2.5]).unwrap(),
            0.05,
        )
        .unwrap();
        let sigma = 0.3;
        let g = GridDensity::from_fn(spec, |z| {
            (-((z[0] - 1.0).powi(2) + z[1] * z[1]) / (2.0 * sigma * sigma)).exp()
        })
        .unwrap()
        .normalized();
        let out = propagate_density(&h, &g.into(), FRAC_PI_2, 1e-2).unwrap();
        let c = out.density.mean();
        assert!(c[0].abs() < 1e-3 && (c[1] + 1.0).abs() < 1e-3, "{c:?}");
        assert!(out.escaped_mass.abs() < 1e-3);
        assert!((out.density.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_interpolation() {
        let spec = GridSpec::new(
            BoundingBox::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap(),
            vec![4, 2],
        )
        .unwrap();
        // Linear functions are reproduced between centres.
        let g = GridDensity::from_fn(spec, |z| 1.0 + z[0] + 2.0 * z[1]).unwrap();
        for z in [[0.5, 0.5], [1.7, 1.2], [3.5, 1.5], [2.0, 0.9]] {
            assert!((g.evaluate(&z) - (1.0 + z[0] + 2.0 * z[1])).abs() < 1e-12);
        }
        assert_eq!(g.evaluate(&[-0.1, 1.0]), 0.0);
        assert_eq!(g.evaluate(&[0.1, 0.1]), g.values()[0]);
    }

    #[test]
    fn uniform_box_entropy_is_zero() {
        let m = mixedness(&unit_box_grid(10).into()).unwrap();
        assert!(m.entropy.abs() < 1e-12);
        assert!(m.renyi2.abs() < 1e-12);
        assert_eq!(m.bandwidth, None);
    }

    #[test]
    fn gaussian_entropy_matches_closed_form() {
        let rho = blob([0.0, 0.0], 1.0, 20_000, 5);
        let m = mixedness(&rho).unwrap();
        let exact = (2.0 * PI * E).ln();
        assert!((m.entropy - exact).abs() < 0.05, "{} vs {exact}", m.entropy);
        assert!((m.renyi2 - (4.0 * PI).ln()).abs() < 0.05);
    }

    #[test]
    fn sample_overlap_matches_gaussian_formula() {
        // Two well-sampled blobs of width σ, Δ apart: ∫ρaρb ≈ e^{−Δ²/4σ'²}/(4πσ'²)
        // with σ'² = σ² + b² from the kernel.
        let sigma = 0.25;
        let a = blob([0.0, 0.0], sigma, 3000, 6);
        let b = blob([0.6, 0.0], sigma, 3000, 7);
        let ba = a.bandwidth().unwrap();
        let s2 = sigma * sigma + ba * ba;
        let expect = (-0.36 / (4.0 * s2)).exp() / (4.0 * PI * s2);
        let got = overlap(&a, &b).unwrap();
        assert!((got / expect - 1.0).abs() < 0.1, "{got} vs {expect}");
        let far = blob([5.0, 0.0], sigma, 100, 8);
        assert!(overlap(&a, &far).unwrap() / overlap(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn l1_properties() {
        let a = blob([0.0, 0.0], 0.3, 500, 9);
        let b = blob([3.0, 0.0], 0.3, 500, 10);
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        let d = l1_distance(&a, &b).unwrap();
        assert!((d - 2.0).abs() < 1e-3, "{d}");
        let g1: PhaseSpaceDensity = unit_box_grid(8).into();
        assert!(l1_distance(&g1, &unit_box_grid(8).into()).unwrap() < 1e-15);
    }

    #[test]
    fn sample_mixture_concatenates() {
        let a = blob([0.0, 0.0], 0.3, 10, 11);
        let b = blob([3.0, 0.0], 0.3, 10, 12);
        let m = PhaseSpaceDensity::mixture(&[(0.25, &a), (0.75, &b)]).unwrap();
        match &m {
            PhaseSpaceDensity::Samples(s) => assert_eq!(s.len(), 20),
            _ => panic!("expected samples"),
        }
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!((m.mean()[0] - (0.25 * a.mean()[0] + 0.75 * b.mean()[0])).abs() < 1e-12);
    }

    #[test]
    fn kde_render_is_normalized() {
        let a = blob([0.3, -0.2], 0.5, 400, 13);
        let g = a.to_grid().unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-3);
        let z = [0.3, -0.2];
        assert!((g.evaluate(&z) / a.evaluate(&z) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn csv_round_trips() {
        let a = match blob([0.0, 1.0], 0.3, 7, 14) {
            PhaseSpaceDensity::Samples(s) => s,
            _ => unreachable!(),
        };
        let mut buf = Vec::new();
        write_samples_csv(&a, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("q1,p1,weight\n"));
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), a);

        let spec = GridSpec::new(
            BoundingBox::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(),
            vec![2, 3],
        )
        .unwrap();
        let g = GridDensity::from_fn(spec, |z| z[0] * z[0] + z[1]).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&g, &mut buf).unwrap();
        assert_eq!(read_grid_csv(buf.as_slice()).unwrap(), g);
        assert!(read_grid_csv("upper,1\n".as_bytes()).is_err());
    }
}
