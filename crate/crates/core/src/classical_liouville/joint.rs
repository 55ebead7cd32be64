//! Correlated system–clock densities `Σ_t p_t ρ_s(·, t) ρ_c(·, t)`.

use crate::error::{Error, Result};

use super::density::{l1_distance, mixedness, overlap, propagate_density, PhaseSpaceDensity};
use super::hamiltonian::HamiltonianField;

/// Largest admissible `∫ρ_c(t)ρ_c(t′) / ∫ρ_c(t)²` between distinct branches.
pub const CLOCK_OVERLAP_TOL: f64 = 1e-6;
const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct JointBranch {
    pub label: f64,
    pub probability: f64,
    pub system: PhaseSpaceDensity,
    pub clock: PhaseSpaceDensity,
}

#[derive(Clone, Debug)]
pub struct JointDensity {
    branches: Vec<JointBranch>,
    /// `overlaps[i][j] = ∫ρ_c(t_i) ρ_c(t_j)`.
    overlaps: Vec<Vec<f64>>,
}

/// Validates branch probabilities and clock disjointness.
pub fn build_joint_density(branches: Vec<JointBranch>) -> Result<JointDensity> {
    let first = branches.first().ok_or(Error::EmptySupport)?;
    let (ds, dc) = (first.system.dim(), first.clock.dim());
    for b in &branches {
        if b.system.dim() != ds || b.clock.dim() != dc {
            return Err(Error::DimensionMismatch {
                expected: if b.system.dim() != ds { ds } else { dc },
                actual: if b.system.dim() != ds {
                    b.system.dim()
                } else {
                    b.clock.dim()
                },
            });
        }
        if !(b.probability.is_finite() && b.probability >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "branch probability {} must be non-negative",
                b.probability
            )));
        }
    }
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::InvalidParameter(format!(
            "branch probabilities sum to {total}, expected 1"
        )));
    }
    let n = branches.len();
    let mut overlaps = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let o = overlap(&branches[i].clock, &branches[j].clock)?;
            overlaps[i][j] = o;
            overlaps[j][i] = o;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ratio = overlaps[i][j] / overlaps[i][i];
            if !(ratio < CLOCK_OVERLAP_TOL) {
                return Err(Error::NonOrthogonalClock {
                    first: i,
                    second: j,
                    overlap: ratio,
                });
            }
        }
    }
    Ok(JointDensity { branches, overlaps })
}

impl JointDensity {
    pub fn branches(&self) -> &[JointBranch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.label).collect()
    }

    pub fn clock_overlaps(&self) -> &[Vec<f64>] {
        &self.overlaps
    }

    /// Largest normalized overlap between distinct clock branches.
    pub fn max_clock_overlap(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.overlaps[i][j] / self.overlaps[i][i]);
                }
            }
        }
        worst
    }

    pub fn total_mass(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.probability * b.system.total_mass() * b.clock.total_mass())
            .sum()
    }

    pub fn evaluate(&self, system: &[f64], clock: &[f64]) -> f64 {
        self.branches
            .iter()
            .map(|b| b.probability * b.system.evaluate(system) * b.clock.evaluate(clock))
            .sum()
    }

    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| (b.label - label).abs() <= 1e-12 * label.abs().max(1.0))
    }
}

/// `∫dω_c ρ_c(ω_c, t) ρ_sc(ω_s, ω_c)` divided by `p_t ∫ρ_c(·, t)²`.
///
/// The result is the mixture `Σ_{t′} (p_{t′} O(t, t′) / (p_t O(t, t))) ρ_s(t′)`.
pub fn condition_on_clock_density(joint: &JointDensity, index: usize) -> Result<PhaseSpaceDensity> {
    let n = joint.len();
    if index >= n {
        return Err(Error::InvalidLabel {
            label: index,
            len: n,
        });
    }
    let pt = joint.branches[index].probability;
    let norm = pt * joint.overlaps[index][index];
    if !(norm > 0.0) {
        return Err(Error::ZeroNormConditional { index });
    }
    let parts: Vec<(f64, &PhaseSpaceDensity)> = joint
        .branches
        .iter()
        .enumerate()
        .map(|(j, b)| (b.probability * joint.overlaps[index][j] / norm, &b.system))
        .collect();
    PhaseSpaceDensity::mixture(&parts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointMixedness {
    /// Differential entropy of the joint density (nats).
    pub entropy: f64,
    /// Entropy of each stored system branch.
    pub system_entropies: Vec<f64>,
    pub clock_entropies: Vec<f64>,
    /// Shannon entropy of the branch probabilities.
    pub label_entropy: f64,
    /// `∫ρ_sc²`.
    pub purity: f64,
    /// `max_t ∫(ρ_s(t) ρ_c(t))²`.
    pub max_branch_purity: f64,
}

/// Entropy by the chain rule over branches, which is exact because the
/// clock branches have disjoint support.
pub fn joint_mixedness(joint: &JointDensity) -> Result<JointMixedness> {
    let mut system_entropies = Vec::with_capacity(joint.len());
    let mut clock_entropies = Vec::with_capacity(joint.len());
    let mut label_entropy = 0.0;
    let mut entropy = 0.0;
    for b in &joint.branches {
        let hs = mixedness(&b.system)?.entropy;
        let hc = mixedness(&b.clock)?.entropy;
        system_entropies.push(hs);
        clock_entropies.push(hc);
        if b.probability > 0.0 {
            label_entropy -= b.probability * b.probability.ln();
            entropy += b.probability * (hs + hc);
        }
    }
    entropy += label_entropy;
    let n = joint.len();
    let mut purity = 0.0;
    let mut max_branch_purity = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let oc = joint.overlaps[i][j];
            if oc == 0.0 {
                continue;
            }
            let os = overlap(&joint.branches[i].system, &joint.branches[j].system)?;
            let term = joint.branches[i].probability * joint.branches[j].probability * os * oc;
            purity += if i == j { term } else { 2.0 * term };
            if i == j {
                max_branch_purity = max_branch_purity.max(os * oc);
            }
        }
    }
    Ok(JointMixedness {
        entropy,
        system_entropies,
        clock_entropies,
        label_entropy,
        purity,
        max_branch_purity,
    })
}

/// Propagates every branch, the system by `h_s` and the clock by `h_c`, and
/// shifts the labels by `delta`.
pub fn propagate_joint(
    joint: &JointDensity,
    h_s: &dyn HamiltonianField,
    h_c: &dyn HamiltonianField,
    delta: f64,
    dt: f64,
) -> Result<JointDensity> {
    let branches = joint
        .branches
        .iter()
        .map(|b| {
            Ok(JointBranch {
                label: b.label + delta,
                probability: b.probability,
                system: propagate_density(h_s, &b.system, delta, dt)?.density,
                clock: propagate_density(h_c, &b.clock, delta, dt)?.density,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_joint_density(branches)
}

/// Upper bound on the joint `L¹` distance from branch-wise distances:
/// `Σ_t |p_t − p′_t| + min(p_t, p′_t)(‖Δρ_s‖₁ + ‖Δρ_c‖₁)` for normalized
/// factors. Branches are paired by position.
pub fn paired_l1_bound(a: &JointDensity, b: &JointDensity) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut total = 0.0;
    for (x, y) in a.branches.iter().zip(&b.branches) {
        let ds = l1_distance(&x.system, &y.system)?;
        let dc = l1_distance(&x.clock, &y.clock)?;
        total +=
            (x.probability - y.probability).abs() + x.probability.min(y.probability) * (ds + dc);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical_liouville::density::SampleDensity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blob(center: [f64; 2], sigma: f64, n: usize, seed: u64) -> PhaseSpaceDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleDensity::gaussian(&center, &[sigma, sigma], n, &mut rng)
            .unwrap()
            .into()
    }

    fn line_of_clocks(d: usize, sigma: f64) -> JointDensity {
        let branches = (0..d)
            .map(|k| JointBranch {
                label: k as f64,
                probability: 1.0 / d as f64,
                system: blob([k as f64 * 0.1, 1.0], 0.2, 300, 100 + k as u64),
                clock: blob([k as f64 * 10.0 * sigma, 0.0], sigma, 300, 200 + k as u64),
            })
            .collect();
        build_joint_density(branches).unwrap()
    }

    #[test]
    fn single_branch_is_product() {
        let s = blob([0.0, 1.0], 0.3, 200, 1);
        let c = blob([0.0, 0.0], 0.3, 200, 2);
        let j = build_joint_density(vec![JointBranch {
            label: 0.0,
            probability: 1.0,
            system: s.clone(),
            clock: c.clone(),
        }])
        .unwrap();
        let (zs, zc) = ([0.1, 0.9], [0.05, -0.1]);
        assert!((j.evaluate(&zs, &zc) - s.evaluate(&zs) * c.evaluate(&zc)).abs() < 1e-15);
        let back = condition_on_clock_density(&j, 0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn spaced_clocks_are_disjoint() {
        let j = line_of_clocks(8, 0.1);
        assert!(j.max_clock_overlap() < 1e-6);
        assert!((j.total_mass() - 1.0).abs() < 1e-12);
        for k in 0..8 {
            let back = condition_on_clock_density(&j, k).unwrap();
            let d = l1_distance(&back, &j.branches()[k].system).unwrap();
            assert!(d < 1e-6, "branch {k}: {d}");
        }
        assert_eq!(
            condition_on_clock_density(&j, 8).unwrap_err(),
            Error::InvalidLabel { label: 8, len: 8 }
        );
    }

    #[test]
    fn identical_clocks_are_rejected() {
        let c = blob([0.0, 0.0], 0.1, 100, 3);
        let branches = (0..2)
            .map(|k| JointBranch {
                label: k as f64,
                probability: 0.5,
                system: blob([k as f64, 0.0], 0.1, 100, 4 + k as u64),
                clock: c.clone(),
            })
            .collect();
        assert!(matches!(
            build_joint_density(branches),
            Err(Error::NonOrthogonalClock {
                first: 0,
                second: 1,
                ..
            })
        ));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let branches = vec![JointBranch {
            label: 0.0,
            probability: 0.9,
            system: blob([0.0, 0.0], 0.1, 10, 5),
            clock: blob([0.0, 0.0], 0.1, 10, 6),
        }];
        assert!(matches!(
            build_joint_density(branches),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn joint_is_more_mixed_than_branches() {
        let j = line_of_clocks(4, 0.25);
        let m = joint_mixedness(&j).unwrap();
        assert!((m.label_entropy - 4f64.ln()).abs() < 1e-12);
        for hs in &m.system_entropies {
            assert!(m.entropy >= *hs);
        }
        assert!(m.purity <= m.max_branch_purity);
    }
}
