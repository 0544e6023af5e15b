//! Augmented states and distance-like functions.
//!
//! The convergence theory runs on an augmented space `Y = X x Phi`, where
//! `X` carries the target marginal and `Phi` is an auxiliary label space
//! (a single point in the classical, non-augmented case). Distances on `Y`
//! are "distance-like": symmetric, point-separating, and lower
//! semi-continuous, but not necessarily metrics. Three stock shapes are
//! provided besides fully custom ones:
//!
//! - `trivial`: `d(y1, y2) = 1{y1 != y2}`, the total-variation distance base;
//! - `v_weighted`: `d_q(y1, y2) = 1{y1 != y2} (V^q(y1) + V^q(y2))` for a
//!   Lyapunov-style weight `V >= 1` and power `q in (0, 1]`;
//! - `weak_harris`: `sqrt(d_base(y1, y2) (1 + V^q(y1) + V^q(y2)))` for a
//!   base distance bounded by one.
//!
//! Real-coordinate states compare bitwise: two states are the same point
//! exactly when every coordinate has identical bits, which keeps hashing and
//! point separation meaningful without a tolerance parameter.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AirError, Result};

/// Position component of an augmented state.
#[derive(Debug, Clone)]
pub enum Point {
    /// A state of a finite space, by index.
    Label(usize),
    /// A state of a continuous space, by coordinates.
    Coords(Vec<f64>),
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Point::Label(a), Point::Label(b)) => a == b,
            (Point::Coords(a), Point::Coords(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Eq for Point {}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Point::Label(a) => {
                0u8.hash(state);
                a.hash(state);
            }
            Point::Coords(v) => {
                1u8.hash(state);
                for x in v {
                    x.to_bits().hash(state);
                }
            }
        }
    }
}

/// A point of the augmented space `Y = X x Phi`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AugmentedState {
    /// Position in `X`.
    pub x: Point,
    /// Auxiliary label in `Phi`; `0` in the non-augmented case.
    pub phi: usize,
}

impl AugmentedState {
    /// Finite state `i` with the trivial auxiliary label.
    pub fn label(i: usize) -> Self {
        Self {
            x: Point::Label(i),
            phi: 0,
        }
    }

    /// Finite state `i` with auxiliary label `phi`.
    pub fn labeled(i: usize, phi: usize) -> Self {
        Self {
            x: Point::Label(i),
            phi,
        }
    }

    /// Continuous state with the trivial auxiliary label.
    pub fn coords(v: Vec<f64>) -> Self {
        Self {
            x: Point::Coords(v),
            phi: 0,
        }
    }
}

/// Scalar function of an augmented state, shared and thread-safe.
pub type StateFn = Arc<dyn Fn(&AugmentedState) -> f64 + Send + Sync>;

/// Pairwise function of augmented states, shared and thread-safe.
pub type PairFn = Arc<dyn Fn(&AugmentedState, &AugmentedState) -> f64 + Send + Sync>;

/// Build a [`StateFn`] from a table indexed by finite `X`-labels.
///
/// The auxiliary label is ignored, matching weights of the form `V(x)`.
pub fn state_fn_from_table(values: Vec<f64>) -> StateFn {
    Arc::new(move |y: &AugmentedState| match y.x {
        Point::Label(i) => values[i],
        Point::Coords(_) => f64::NAN,
    })
}

/// The shape of a distance-like function.
pub enum DistanceKind {
    /// `1{y1 != y2}`.
    Trivial,
    /// `1{y1 != y2} (V^q(y1) + V^q(y2))`.
    VWeighted {
        /// Weight `V >= 1`.
        v: StateFn,
        /// Power `q in (0, 1]`.
        q: f64,
    },
    /// `sqrt(base(y1, y2) (1 + V^q(y1) + V^q(y2)))` with `base <= 1`.
    WeakHarris {
        /// Base distance, bounded by one.
        base: Box<DistanceLike>,
        /// Weight `V >= 1`.
        v: StateFn,
        /// Power `q in (0, 1]`.
        q: f64,
    },
    /// Arbitrary user-supplied pairwise function.
    Custom(PairFn),
}

impl std::fmt::Debug for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceKind::Trivial => write!(f, "Trivial"),
            DistanceKind::VWeighted { q, .. } => write!(f, "VWeighted {{ q: {q} }}"),
            DistanceKind::WeakHarris { base, q, .. } => {
                write!(f, "WeakHarris {{ base: {base:?}, q: {q} }}")
            }
            DistanceKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A distance-like function on the augmented space.
#[derive(Debug)]
pub struct DistanceLike {
    /// Shape of the function.
    pub kind: DistanceKind,
    /// Whether values are guaranteed in `[0, 1]`.
    pub bounded_by_one: bool,
    /// Whether the function is a true metric (triangle inequality holds).
    pub metric: bool,
}

impl DistanceLike {
    /// The trivial distance `1{y1 != y2}`.
    pub fn trivial() -> Self {
        Self {
            kind: DistanceKind::Trivial,
            bounded_by_one: true,
            metric: true,
        }
    }

    /// The weighted distance `1{y1 != y2} (V^q(y1) + V^q(y2))`.
    ///
    /// `V` must map into `[1, inf)` and `q` into `(0, 1]`. The result is a
    /// true metric (the triangle inequality holds because `V >= 1 > 0`).
    pub fn v_weighted(v: StateFn, q: f64) -> Result<Self> {
        check_power(q)?;
        Ok(Self {
            kind: DistanceKind::VWeighted { v, q },
            bounded_by_one: false,
            metric: true,
        })
    }

    /// The weak-Harris distance `sqrt(base (1 + V^q(y1) + V^q(y2)))`.
    ///
    /// The base distance must be bounded by one; evaluation re-checks the
    /// bound on every pair and reports a contract violation otherwise.
    pub fn weak_harris(base: DistanceLike, v: StateFn, q: f64) -> Result<Self> {
        check_power(q)?;
        if !base.bounded_by_one {
            return Err(AirError::Distance(
                "weak_harris base distance must be bounded by one".into(),
            ));
        }
        Ok(Self {
            kind: DistanceKind::WeakHarris {
                base: Box::new(base),
                v,
                q,
            },
            bounded_by_one: false,
            metric: false,
        })
    }

    /// A custom distance-like function.
    pub fn custom(eval: PairFn, bounded_by_one: bool, metric: bool) -> Self {
        Self {
            kind: DistanceKind::Custom(eval),
            bounded_by_one,
            metric,
        }
    }

    /// Evaluate the distance between two augmented states.
    pub fn eval(&self, y1: &AugmentedState, y2: &AugmentedState) -> Result<f64> {
        match &self.kind {
            DistanceKind::Trivial => Ok(if y1 == y2 { 0.0 } else { 1.0 }),
            DistanceKind::VWeighted { v, q } => {
                if y1 == y2 {
                    return Ok(0.0);
                }
                let v1 = check_weight(v(y1))?;
                let v2 = check_weight(v(y2))?;
                Ok(v1.powf(*q) + v2.powf(*q))
            }
            DistanceKind::WeakHarris { base, v, q } => {
                let b = base.eval(y1, y2)?;
                if !(0.0..=1.0 + 1e-15).contains(&b) {
                    return Err(AirError::Distance(format!(
                        "weak_harris base evaluated to {b}, outside [0, 1]"
                    )));
                }
                let v1 = check_weight(v(y1))?.powf(*q);
                let v2 = check_weight(v(y2))?.powf(*q);
                // Sum in value order so the result is bitwise symmetric in
                // the two arguments.
                let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
                Ok((b * (1.0 + lo + hi)).sqrt())
            }
            DistanceKind::Custom(eval) => Ok(eval(y1, y2)),
        }
    }

    /// Evaluate all pairs over a finite support, validating symmetry, zero
    /// diagonal, and point separation.
    pub fn matrix(&self, support: &[AugmentedState]) -> Result<Vec<Vec<f64>>> {
        let n = support.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = self.eval(&support[i], &support[j])?;
            }
        }
        for i in 0..n {
            if m[i][i] != 0.0 {
                return Err(AirError::Distance(format!(
                    "d(y, y) = {} != 0 at support index {i}",
                    m[i][i]
                )));
            }
            for j in (i + 1)..n {
                if m[i][j] != m[j][i] {
                    return Err(AirError::Distance(format!(
                        "asymmetric distance at support indices ({i}, {j}): {} vs {}",
                        m[i][j], m[j][i]
                    )));
                }
                if !(m[i][j] > 0.0) {
                    return Err(AirError::Distance(format!(
                        "distance not point-separating at support indices ({i}, {j}): {}",
                        m[i][j]
                    )));
                }
            }
        }
        Ok(m)
    }
}

fn check_power(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(AirError::Domain(format!(
            "distance power q must lie in (0, 1], got {q}"
        )));
    }
    Ok(())
}

fn check_weight(v: f64) -> Result<f64> {
    if !(v >= 1.0) {
        return Err(AirError::Distance(format!(
            "weight function must map into [1, inf), evaluated to {v}"
        )));
    }
    Ok(v)
}

/// Largest ratio `|f(y1) - f(y2)| / d(y1, y2)` over distinct support points:
/// the exact Lipschitz constant of `f` on the support.
pub fn lipschitz_constant(values: &[f64], d: &[Vec<f64>]) -> f64 {
    let n = values.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max((values[i] - values[j]).abs() / d[i][j]);
        }
    }
    best
}

/// Sample `count` functions that are 1-Lipschitz with respect to `d` on the
/// given support.
///
/// Each function starts from a random seed table and is pulled down by
/// McShane relaxation, `psi(u) <- min_v (psi(v) + d(u, v))`, iterated to a
/// fixpoint. The fixpoint is 1-Lipschitz with respect to `d` even when `d`
/// violates the triangle inequality (it is Lipschitz for the path closure of
/// `d`, which is dominated by `d`); the property is re-verified pair by pair
/// before returning.
pub fn sample_lipschitz_functions(
    d: &[Vec<f64>],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = d.len();
    if n == 0 {
        return Err(AirError::Domain("empty support".into()));
    }
    let spread = d
        .iter()
        .flat_map(|row| row.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut psi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..spread)).collect();
        loop {
            let mut changed = false;
            for u in 0..n {
                for v in 0..n {
                    let cand = psi[v] + d[u][v];
                    if cand < psi[u] {
                        psi[u] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for u in 0..n {
            for v in 0..n {
                if (psi[u] - psi[v]).abs() > d[u][v] + 1e-12 {
                    return Err(AirError::Distance(format!(
                        "relaxed function violates the Lipschitz bound at pair ({u}, {v})"
                    )));
                }
            }
        }
        out.push(psi);
    }
    Ok(out)
}
