//! Integer spectra and Fourier states on a cyclic register of `d` sites.
//!
//! Both the quantum clock and the momentum-ring generator label their
//! eigenstates by integers `n` with `e^{-2πi n/d}` being the phase picked up
//! under a one-site shift. Only the residue of `n` mod `d` is physical for
//! the shift; the representative chosen for each residue (the branch) fixes
//! the spectrum of the generator itself.

use std::f64::consts::PI;

use crate::linalg::{ComplexVector, C64};

/// Which representative of each residue class mod `d` a generator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `{-⌊d/2⌋, …, ⌈d/2⌉ − 1}`; for `d = 2` this is `{-1, 0}`.
    Lower,
    /// `{-⌈d/2⌉ + 1, …, ⌊d/2⌋}`; for `d = 2` this is `{0, 1}`.
    Upper,
}

/// Level of the `i`-th Fourier mode, in FFT order (non-negative first).
pub fn level(d: usize, i: usize, branch: Branch) -> i64 {
    let d = d as i64;
    let i = i as i64;
    let split = match branch {
        Branch::Lower => (d + 1) / 2,
        Branch::Upper => d / 2 + 1,
    };
    if i < split {
        i
    } else {
        i - d
    }
}

pub fn levels(d: usize, branch: Branch) -> Vec<i64> {
    (0..d).map(|i| level(d, i, branch)).collect()
}

/// `e^{-2πi n k / d}`, with the exponent reduced mod `d` before scaling so the
/// phase is exact to rounding for large `n·k`.
pub fn root_of_unity(d: usize, n: i64, k: i64) -> C64 {
    let r = (n * k).rem_euclid(d as i64) as f64;
    C64::from_polar(1.0, -2.0 * PI * r / d as f64)
}

/// Plane wave `d^{-1/2} Σ_x e^{2πi n x/d} |x⟩` in the site basis.
pub fn plane_wave(d: usize, n: i64) -> ComplexVector {
    let a = 1.0 / (d as f64).sqrt();
    ComplexVector::from_vec_unchecked((0..d as i64).map(|x| root_of_unity(d, n, -x) * a).collect())
}
