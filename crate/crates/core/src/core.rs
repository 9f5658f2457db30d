//! Shared domain types: decision pairs, constraint sets with Euclidean
//! projections, and the smoothness profile that drives stepsize selection.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A point of the minimax problem: `x` is the minimization variable,
/// `y` the maximization variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPair {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl DecisionPair {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("DecisionPair"));
        }
        Ok(DecisionPair { x, y })
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(y))
    }
}

/// Constraint set for the maximization variable.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    Unconstrained,
    /// Axis-aligned box `[lo, hi]`, elementwise `lo <= hi`.
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    /// Probability simplex `{ y >= 0, sum(y) = 1 }` in `dim` coordinates.
    Simplex { dim: usize },
    /// Euclidean ball of positive radius.
    Ball { center: DVector<f64>, radius: f64 },
}

impl ConstraintSet {
    pub fn box_set(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if !lo.iter().chain(hi.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument(
                "box requires lo <= hi elementwise".into(),
            ));
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("simplex requires dim >= 1".into()));
        }
        Ok(ConstraintSet::Simplex { dim })
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidArgument("ball requires radius > 0".into()));
        }
        if !center.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("ball center"));
        }
        Ok(ConstraintSet::Ball { center, radius })
    }

    /// Ambient dimension, when the set fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConstraintSet::Unconstrained => None,
            ConstraintSet::Box { lo, .. } => Some(lo.len()),
            ConstraintSet::Simplex { dim } => Some(*dim),
            ConstraintSet::Ball { center, .. } => Some(center.len()),
        }
    }

    /// Euclidean diameter. Unconstrained sets report `+inf`; callers that
    /// require a compact set must reject that value.
    pub fn diameter(&self) -> f64 {
        match self {
            ConstraintSet::Unconstrained => f64::INFINITY,
            ConstraintSet::Box { lo, hi } => (hi - lo).norm(),
            // Distance between two vertices e_i, e_j; a 1-point simplex is degenerate.
            ConstraintSet::Simplex { dim } => {
                if *dim >= 2 {
                    2.0_f64.sqrt()
                } else {
                    0.0
                }
            }
            ConstraintSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        match self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
            ConstraintSet::Simplex { .. } => {
                v.iter().all(|x| *x >= -tol) && (v.sum() - 1.0).abs() <= tol
            }
            ConstraintSet::Ball { center, radius } => (v - center).norm() <= radius + tol,
        }
    }

    /// Euclidean projection onto the set.
    ///
    /// Idempotent and nonexpansive. The simplex case uses the
    /// sort-and-threshold algorithm; entries tied at the threshold clip to
    /// zero like any other inactive entry.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("projection input"));
        }
        if let Some(d) = self.dim() {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "projection input",
                    expected: d,
                    found: v.len(),
                });
            }
        }
        Ok(match self {
            ConstraintSet::Unconstrained => v.clone(),
            ConstraintSet::Box { lo, hi } => DVector::from_iterator(
                v.len(),
                v.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(x, (l, h))| x.max(*l).min(*h)),
            ),
            ConstraintSet::Simplex { dim } => project_simplex(v, *dim),
            ConstraintSet::Ball { center, radius } => {
                let mut p = v.clone();
                // Rescaling can overshoot the radius by an ulp; repeat until
                // containment holds (or the bits stop changing) so projecting
                // a projected point is the identity bit-for-bit.
                for _ in 0..8 {
                    let diff = &p - center;
                    let norm = diff.norm();
                    if norm <= *radius {
                        break;
                    }
                    let next = center + diff * (*radius / norm);
                    if next == p {
                        break;
                    }
                    p = next;
                }
                p
            }
        })
    }
}

/// Sort-and-threshold projection onto the probability simplex.
fn project_simplex(v: &DVector<f64>, dim: usize) -> DVector<f64> {
    // Feasible points map to themselves. The explicit fast path makes the
    // projection exactly idempotent: the threshold recomputation on an
    // already-projected vector would otherwise drift by an ulp.
    let slack = 1e-13 * (1.0 + dim as f64);
    if v.iter().all(|x| *x >= 0.0) && (v.sum() - 1.0).abs() <= slack {
        return v.clone();
    }
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    DVector::from_iterator(dim, v.iter().map(|x| (x - tau).max(0.0)))
}

/// Concavity class of the objective in the maximization variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcavityClass {
    StronglyConcave,
    Concave,
    Pl,
}

impl ConcavityClass {
    pub fn name(&self) -> &'static str {
        match self {
            ConcavityClass::StronglyConcave => "strongly-concave",
            ConcavityClass::Concave => "concave",
            ConcavityClass::Pl => "PL",
        }
    }
}

/// Smoothness and moment constants of a problem instance.
///
/// `ell` is the smoothness constant of the expected objective, `mu` the
/// strong-concavity or PL modulus in `y` (zero for merely concave problems),
/// `lip_l` the Lipschitz constant of the objective in `x`, `lip_l0` the
/// Lipschitz constant of the location-scale mean map, `lip_l1` the uniform
/// first-moment bound on the integrand gradients, and `sigma` the gradient
/// variance bound. Constants that are unbounded globally are recorded as
/// suprema over the benchmark's evaluation box.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessProfile {
    pub ell: f64,
    pub mu: f64,
    pub lip_l: f64,
    pub lip_l0: f64,
    pub lip_l1: f64,
    pub sigma: f64,
    pub concavity_class: ConcavityClass,
}

impl SmoothnessProfile {
    pub fn new(
        ell: f64,
        mu: f64,
        lip_l: f64,
        lip_l0: f64,
        lip_l1: f64,
        sigma: f64,
        concavity_class: ConcavityClass,
    ) -> Result<Self> {
        if !ell.is_finite() || ell <= 0.0 {
            return Err(Error::InvalidArgument("profile requires ell > 0".into()));
        }
        if mu < 0.0 || lip_l < 0.0 || lip_l0 < 0.0 || lip_l1 < 0.0 || sigma < 0.0 {
            return Err(Error::InvalidArgument(
                "profile constants must be nonnegative".into(),
            ));
        }
        if mu > 0.0 && mu > ell {
            return Err(Error::InvalidArgument(
                "profile requires mu <= ell when mu > 0".into(),
            ));
        }
        if matches!(
            concavity_class,
            ConcavityClass::StronglyConcave | ConcavityClass::Pl
        ) && mu == 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "{} class requires mu > 0",
                concavity_class.name()
            )));
        }
        Ok(SmoothnessProfile {
            ell,
            mu,
            lip_l,
            lip_l0,
            lip_l1,
            sigma,
            concavity_class,
        })
    }
}

/// Condition number `ell / mu`.
pub fn condition_number(profile: &SmoothnessProfile) -> Result<f64> {
    if profile.mu <= 0.0 {
        return Err(Error::UndefinedConditionNumber);
    }
    Ok(profile.ell / profile.mu)
}
