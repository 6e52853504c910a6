//! Subjective-logic opinions and Dempster-Shafer combination.
//!
//! An opinion over `K` classes puts belief mass `b_k` on each singleton and
//! the remaining mass `u` on the whole frame. Two opinions combine with
//! Dempster's rule restricted to those focal elements:
//!
//! ```text
//! C   = sum_{i != j} b1_i b2_j
//! b_k = (b1_k b2_k + b1_k u2 + b2_k u1) / (1 - C)
//! u   = u1 u2 / (1 - C)
//! ```
//!
//! [`ds_full_dempster_oracle`] implements the unrestricted rule by
//! enumerating intersections of focal sets and is used to validate the
//! reduced formulas.

use std::collections::BTreeMap;

use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};

/// Masses must sum to one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Combinations with conflict at or above `1 - CONFLICT_MARGIN` are rejected.
pub const CONFLICT_MARGIN: f64 = 1e-12;

/// Largest frame accepted by the full Dempster oracle.
pub const MAX_ORACLE_FRAME: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    beliefs: Vec<f64>,
    uncertainty: f64,
}

impl Opinion {
    pub fn new(beliefs: Vec<f64>, uncertainty: f64) -> Result<Self> {
        if beliefs.is_empty() {
            return Err(Error::Domain("opinion needs at least one class".into()));
        }
        if let Some(v) = beliefs
            .iter()
            .chain(std::iter::once(&uncertainty))
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Domain(format!("opinion mass {v} is negative or non-finite")));
        }
        let total: f64 = beliefs.iter().sum::<f64>() + uncertainty;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("opinion masses sum to {total}, not 1")));
        }
        Ok(Self {
            beliefs,
            uncertainty,
        })
    }

    /// Total ignorance: no belief, `u = 1`.
    pub fn vacuous(classes: usize) -> Self {
        Self {
            beliefs: vec![0.0; classes],
            uncertainty: 1.0,
        }
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn classes(&self) -> usize {
        self.beliefs.len()
    }

    /// Projected probability with a uniform base rate: `b_k + u / K`.
    pub fn projected(&self) -> Vec<f64> {
        let share = self.uncertainty / self.classes() as f64;
        self.beliefs.iter().map(|b| b + share).collect()
    }
}

/// Non-negative per-class evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceVector(Vec<f64>);

impl EvidenceVector {
    pub fn new(e: Vec<f64>) -> Result<Self> {
        if let Some(v) = e.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("evidence {v} is negative or non-finite")));
        }
        Ok(Self(e))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Basic probability assignment over the binary frame `{true, false}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bpa {
    pub m_true: f64,
    pub m_false: f64,
    pub m_uncertain: f64,
}

impl Bpa {
    pub fn new(m_true: f64, m_false: f64, m_uncertain: f64) -> Result<Self> {
        let parts = [m_true, m_false, m_uncertain];
        if parts.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!("BPA masses {parts:?} must be non-negative")));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("BPA masses sum to {total}, not 1")));
        }
        Ok(Self {
            m_true,
            m_false,
            m_uncertain,
        })
    }

    pub fn vacuous() -> Self {
        Self {
            m_true: 0.0,
            m_false: 0.0,
            m_uncertain: 1.0,
        }
    }
}

/// `alpha = e + 1`.
pub fn evidence_to_dirichlet(e: &EvidenceVector) -> Result<DirichletParams> {
    DirichletParams::new(e.0.iter().map(|x| x + 1.0).collect())
}

/// `b_k = (alpha_k - 1) / S`, `u = K / S`.
pub fn dirichlet_to_opinion(d: &DirichletParams) -> Result<Opinion> {
    if let Some(a) = d.alpha().iter().find(|&&a| a < 1.0) {
        return Err(Error::Precondition(format!(
            "opinion mapping needs alpha >= 1 (non-negative evidence), got {a}"
        )));
    }
    let s = d.strength();
    Ok(Opinion {
        beliefs: d.alpha().iter().map(|a| (a - 1.0) / s).collect(),
        uncertainty: d.classes() as f64 / s,
    })
}

/// Inverse of [`dirichlet_to_opinion`]: `S = K / u`, `alpha_k = b_k S + 1`.
pub fn opinion_to_dirichlet(op: &Opinion) -> Result<DirichletParams> {
    if op.uncertainty <= 0.0 {
        return Err(Error::Domain("a dogmatic opinion (u = 0) has no Dirichlet counterpart".into()));
    }
    let s = op.classes() as f64 / op.uncertainty;
    DirichletParams::new(op.beliefs.iter().map(|b| b * s + 1.0).collect())
}

/// A combined opinion together with the conflict that was normalised away.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub opinion: Opinion,
    pub conflict: f64,
}

fn same_classes(a: &Opinion, b: &Opinion) -> Result<()> {
    if a.classes() == b.classes() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "opinions over {} and {} classes",
            a.classes(),
            b.classes()
        )))
    }
}

/// `C = sum_{i != j} b1_i b2_j`, written so swapping the arguments is bitwise neutral.
fn conflict(b1: &[f64], b2: &[f64]) -> f64 {
    let s1: f64 = b1.iter().sum();
    let s2: f64 = b2.iter().sum();
    let agree: f64 = b1.iter().zip(b2).map(|(x, y)| x * y).sum();
    (s1 * s2 - agree).max(0.0)
}

/// Reduced Dempster combination of two opinions.
pub fn ds_combine_reduced(m1: &Opinion, m2: &Opinion) -> Result<Fusion> {
    same_classes(m1, m2)?;
    let c = conflict(&m1.beliefs, &m2.beliefs);
    if c >= 1.0 - CONFLICT_MARGIN {
        return Err(Error::TotalConflict { conflict: c });
    }
    let norm = 1.0 - c;
    let (u1, u2) = (m1.uncertainty, m2.uncertainty);
    let beliefs = m1
        .beliefs
        .iter()
        .zip(&m2.beliefs)
        .map(|(&x, &y)| (x * y + (x * u2 + y * u1)) / norm)
        .collect();
    Ok(Fusion {
        opinion: Opinion {
            beliefs,
            uncertainty: u1 * u2 / norm,
        },
        conflict: c,
    })
}

/// Vector-Jacobian product of [`ds_combine_reduced`]: given `dL/db` and
/// `dL/du` of the combined opinion, returns `(dL/db1, dL/du1, dL/db2, dL/du2)`.
pub fn ds_combine_reduced_vjp(
    m1: &Opinion,
    m2: &Opinion,
    grad_b: &[f64],
    grad_u: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>, f64)> {
    let fused = ds_combine_reduced(m1, m2)?;
    let norm = 1.0 - fused.conflict;
    let (b1, b2) = (&m1.beliefs, &m2.beliefs);
    let (u1, u2) = (m1.uncertainty, m2.uncertainty);
    // dL/d(1-C); b_k and u are numerators divided by (1-C).
    let grad_norm = -(grad_b
        .iter()
        .zip(&fused.opinion.beliefs)
        .map(|(g, b)| g * b)
        .sum::<f64>()
        + grad_u * fused.opinion.uncertainty)
        / norm;
    let s1: f64 = b1.iter().sum();
    let s2: f64 = b2.iter().sum();
    let mut g1 = Vec::with_capacity(b1.len());
    let mut g2 = Vec::with_capacity(b2.len());
    let mut gu1 = grad_u * u2 / norm;
    let mut gu2 = grad_u * u1 / norm;
    for k in 0..b1.len() {
        let gk = grad_b[k] / norm;
        // d(1-C)/db1_k = -(s2 - b2_k)
        g1.push(gk * (b2[k] + u2) - grad_norm * (s2 - b2[k]));
        g2.push(gk * (b1[k] + u1) - grad_norm * (s1 - b1[k]));
        gu1 += gk * b2[k];
        gu2 += gk * b1[k];
    }
    Ok((g1, gu1, g2, gu2))
}

/// Multi-source combination, folded left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFusion {
    pub opinion: Opinion,
    /// Conflict of each pairwise step, in fold order.
    pub conflicts: Vec<f64>,
}

pub fn ds_combine_multi(opinions: &[Opinion]) -> Result<MultiFusion> {
    let (first, rest) = opinions
        .split_first()
        .ok_or_else(|| Error::Precondition("cannot combine an empty list of opinions".into()))?;
    let mut acc = first.clone();
    let mut conflicts = Vec::with_capacity(rest.len());
    for op in rest {
        let f = ds_combine_reduced(&acc, op)?;
        conflicts.push(f.conflict);
        acc = f.opinion;
    }
    Ok(MultiFusion {
        opinion: acc,
        conflicts,
    })
}

/// `m_true = belief * sensor`, `m_false = belief * (1 - sensor)`, `m_uncertain = 1 - belief`.
pub fn ds_bpa(belief: f64, sensor_value: f64) -> Result<Bpa> {
    for (name, v) in [("belief", belief), ("sensor value", sensor_value)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} {v} is outside [0, 1]")));
        }
    }
    Ok(Bpa {
        m_true: belief * sensor_value,
        m_false: belief * (1.0 - sensor_value),
        m_uncertain: 1.0 - belief,
    })
}

/// Dempster's rule on `{T}`, `{F}`, `{T, F}`.
pub fn ds_combine_bpa(b1: &Bpa, b2: &Bpa) -> Result<Bpa> {
    let c = b1.m_true * b2.m_false + b1.m_false * b2.m_true;
    if c >= 1.0 - CONFLICT_MARGIN {
        return Err(Error::TotalConflict { conflict: c });
    }
    let norm = 1.0 - c;
    let (u1, u2) = (b1.m_uncertain, b2.m_uncertain);
    Ok(Bpa {
        m_true: (b1.m_true * b2.m_true + (b1.m_true * u2 + b2.m_true * u1)) / norm,
        m_false: (b1.m_false * b2.m_false + (b1.m_false * u2 + b2.m_false * u1)) / norm,
        m_uncertain: u1 * u2 / norm,
    })
}

/// A mass function over subsets of a frame of `frame_size` elements, focal
/// sets encoded as bitmasks.
#[derive(Debug, Clone, PartialEq)]
pub struct MassAssignment {
    frame_size: usize,
    masses: BTreeMap<u32, f64>,
}

impl MassAssignment {
    pub fn new(frame_size: usize, masses: BTreeMap<u32, f64>) -> Result<Self> {
        if frame_size == 0 || frame_size > MAX_ORACLE_FRAME {
            return Err(Error::Precondition(format!(
                "frame size {frame_size} outside 1..={MAX_ORACLE_FRAME}"
            )));
        }
        let full = (1u32 << frame_size) - 1;
        for (&set, &m) in &masses {
            if set == 0 || set & !full != 0 {
                return Err(Error::Domain(format!("focal set {set:#b} is empty or outside the frame")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Domain(format!("mass {m} on {set:#b} is negative")));
            }
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { frame_size, masses })
    }

    /// Singletons `{k}` carry `b_k`, the full frame carries `u`.
    pub fn from_opinion(op: &Opinion) -> Result<Self> {
        let k = op.classes();
        let mut masses = BTreeMap::new();
        for (i, &b) in op.beliefs.iter().enumerate() {
            masses.insert(1u32 << i, b);
        }
        *masses.entry(full_frame(k)).or_insert(0.0) += op.uncertainty;
        Self::new(k, masses)
    }

    /// Frame `{T, F}`: bit 0 is true, bit 1 is false.
    pub fn from_bpa(b: &Bpa) -> Self {
        Self {
            frame_size: 2,
            masses: BTreeMap::from([(0b01, b.m_true), (0b10, b.m_false), (0b11, b.m_uncertain)]),
        }
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn mass(&self, set: u32) -> f64 {
        self.masses.get(&set).copied().unwrap_or(0.0)
    }

    pub fn masses(&self) -> &BTreeMap<u32, f64> {
        &self.masses
    }

    /// Reads the result back as an opinion; fails if mass sits on a focal set
    /// other than a singleton or the full frame.
    pub fn to_opinion(&self) -> Result<Opinion> {
        let full = full_frame(self.frame_size);
        let mut beliefs = vec![0.0; self.frame_size];
        let mut u = 0.0;
        for (&set, &m) in &self.masses {
            if set == full {
                u += m;
            } else if set.count_ones() == 1 {
                beliefs[set.trailing_zeros() as usize] += m;
            } else if m != 0.0 {
                return Err(Error::Domain(format!("mass on non-opinion focal set {set:#b}")));
            }
        }
        Ok(Opinion {
            beliefs,
            uncertainty: u,
        })
    }

    pub fn to_bpa(&self) -> Result<Bpa> {
        if self.frame_size != 2 {
            return Err(Error::Shape(format!("BPA needs a binary frame, got {}", self.frame_size)));
        }
        Ok(Bpa {
            m_true: self.mass(0b01),
            m_false: self.mass(0b10),
            m_uncertain: self.mass(0b11),
        })
    }
}

fn full_frame(k: usize) -> u32 {
    (1u32 << k) - 1
}

/// Dempster's rule over arbitrary focal sets: every tuple of focal
/// elements contributes the product of its masses to the intersection,
/// mass landing on the empty set is the conflict and is normalised away.
pub fn ds_full_dempster_oracle(sources: &[MassAssignment]) -> Result<MassAssignment> {
    let (first, rest) = sources
        .split_first()
        .ok_or_else(|| Error::Precondition("oracle needs at least one source".into()))?;
    let frame_size = first.frame_size;
    if rest.iter().any(|s| s.frame_size != frame_size) {
        return Err(Error::Shape("sources over different frames".into()));
    }
    // Enumerate the full product of all sources at once rather than folding,
    // so the oracle does not rely on associativity.
    let mut joint: BTreeMap<u32, f64> = BTreeMap::new();
    let mut empty = 0.0;
    let lists: Vec<Vec<(u32, f64)>> = sources
        .iter()
        .map(|s| s.masses.iter().map(|(&k, &v)| (k, v)).collect())
        .collect();
    let mut idx = vec![0usize; lists.len()];
    if lists.iter().any(|l| l.is_empty()) {
        return Err(Error::Domain("a source has no focal elements".into()));
    }
    loop {
        let mut set = full_frame(frame_size);
        let mut mass = 1.0;
        for (l, &i) in lists.iter().zip(&idx) {
            set &= l[i].0;
            mass *= l[i].1;
        }
        if set == 0 {
            empty += mass;
        } else {
            *joint.entry(set).or_insert(0.0) += mass;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                let total: f64 = joint.values().sum();
                if empty >= 1.0 - CONFLICT_MARGIN || total <= 0.0 {
                    return Err(Error::TotalConflict { conflict: empty });
                }
                joint.values_mut().for_each(|m| *m /= total);
                return Ok(MassAssignment {
                    frame_size,
                    masses: joint,
                });
            }
            idx[pos] += 1;
            if idx[pos] < lists[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
