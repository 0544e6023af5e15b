//! Parametrised Markov kernel families.
//!
//! A [`KernelFamily`] bundles everything the runner and the analysis engine
//! need to know about a family `{P_γ}`: how to simulate one transition, and,
//! when the state space is finite, the exact transition matrix and (if known
//! in closed form) the invariant law `π_γ`.
//!
//! Stock families:
//!
//! - [`two_state_family`]: the two-point chain `P_γ = [[1-γ, γ], [γ, 1-γ]]`
//!   with uniform invariant law for every `γ in [0, 1]`;
//! - [`doeblin_family`]: finite chains `P_j = (1-α) Q_j + α 1 νᵀ` sharing a
//!   single invariant law `ν` across the whole parameter grid, with a known
//!   Doeblin constant `α`;
//! - [`grid_metropolis_family`]: a Metropolis chain on a finite grid,
//!   bridging continuous targets to the exact finite-state engine;
//! - [`rwm_family`]: random-walk Metropolis on `R^dim` with step variance
//!   `γ` (simulation only, no exact representation).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AirError, Result};
use crate::geometry::{AugmentedState, Point};
use crate::tol;

/// Adaptation parameter of a kernel family.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    /// A scalar tuning parameter (step size, flip probability, ...).
    Scalar(f64),
    /// An index into a finite parameter grid.
    Index(usize),
    /// A full matrix parameter.
    Matrix(DMatrix<f64>),
}

/// Hashable identity of a [`Param`], by exact bit pattern.
///
/// Two parameters get the same key exactly when they are the same variant
/// with bitwise-identical payload, so caches keyed by `ParamKey` never
/// conflate nearby floating-point values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamKey {
    tag: u8,
    bits: Vec<u64>,
}

impl Param {
    /// Embed the parameter into a flat coordinate vector.
    pub fn embed(&self) -> Vec<f64> {
        match self {
            Param::Scalar(x) => vec![*x],
            Param::Index(i) => vec![*i as f64],
            Param::Matrix(m) => m.transpose().as_slice().to_vec(),
        }
    }

    /// Exact bit-pattern key for caching.
    pub fn key(&self) -> ParamKey {
        match self {
            Param::Scalar(x) => ParamKey {
                tag: 0,
                bits: vec![x.to_bits()],
            },
            Param::Index(i) => ParamKey {
                tag: 1,
                bits: vec![*i as u64],
            },
            Param::Matrix(m) => ParamKey {
                tag: 2,
                bits: std::iter::once(m.nrows() as u64)
                    .chain(m.iter().map(|x| x.to_bits()))
                    .collect(),
            },
        }
    }

    /// The scalar payload, or a domain error.
    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Param::Scalar(x) => Ok(*x),
            other => Err(AirError::Domain(format!(
                "expected a scalar parameter, got {other:?}"
            ))),
        }
    }

    /// The index payload, or a domain error.
    pub fn as_index(&self) -> Result<usize> {
        match self {
            Param::Index(i) => Ok(*i),
            other => Err(AirError::Domain(format!(
                "expected an index parameter, got {other:?}"
            ))),
        }
    }
}

/// Which space a family acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// A finite space with the given number of states.
    Finite(usize),
    /// `R^dim`.
    Real(usize),
}

/// One simulated transition: next state and whether the move was an
/// acceptance (families without a proposal mechanism report `true`).
pub type StepFn =
    Arc<dyn Fn(&Param, &AugmentedState, &mut ChaCha8Rng) -> Result<(AugmentedState, bool)> + Send + Sync>;

/// Exact transition matrix of a finite-space kernel.
pub type ExactFn = Arc<dyn Fn(&Param) -> Result<DMatrix<f64>> + Send + Sync>;

/// Closed-form invariant law of a finite-space kernel.
pub type InvariantFn = Arc<dyn Fn(&Param) -> Result<DVector<f64>> + Send + Sync>;

/// A parametrised family of Markov kernels.
#[derive(Clone)]
pub struct KernelFamily {
    /// Human-readable family name, used in reports.
    pub name: String,
    /// The space the family acts on.
    pub space: SpaceKind,
    /// Canonical parameter grid (may be empty for continuous ranges).
    pub params: Vec<Param>,
    /// Known Doeblin minorisation constant, when the family has one by
    /// construction (`τ(P_γ) <= 1 - α` for every parameter).
    pub doeblin_alpha: Option<f64>,
    step: StepFn,
    exact: Option<ExactFn>,
    invariant: Option<InvariantFn>,
}

impl std::fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelFamily")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("params", &self.params.len())
            .field("doeblin_alpha", &self.doeblin_alpha)
            .field("exact", &self.exact.is_some())
            .field("invariant", &self.invariant.is_some())
            .finish()
    }
}

impl KernelFamily {
    /// Build a family from a simulation rule alone.
    pub fn new(name: impl Into<String>, space: SpaceKind, step: StepFn) -> Self {
        Self {
            name: name.into(),
            space,
            params: Vec::new(),
            doeblin_alpha: None,
            step,
            exact: None,
            invariant: None,
        }
    }

    /// Attach an exact transition-matrix representation.
    pub fn with_exact(mut self, exact: ExactFn) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Attach a closed-form invariant law.
    pub fn with_invariant(mut self, invariant: InvariantFn) -> Self {
        self.invariant = Some(invariant);
        self
    }

    /// Attach a canonical parameter grid.
    pub fn with_params(mut self, params: Vec<Param>) -> Self {
        self.params = params;
        self
    }

    /// Record a Doeblin minorisation constant valid for every parameter.
    pub fn with_doeblin_alpha(mut self, alpha: f64) -> Self {
        self.doeblin_alpha = Some(alpha);
        self
    }

    /// Simulate one transition from `y` under parameter `param`.
    pub fn step(
        &self,
        param: &Param,
        y: &AugmentedState,
        rng: &mut ChaCha8Rng,
    ) -> Result<(AugmentedState, bool)> {
        (self.step)(param, y, rng)
    }

    /// Whether the family carries an exact transition-matrix representation.
    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// The exact transition matrix for `param`, validated row-stochastic.
    pub fn transition_matrix(&self, param: &Param) -> Result<DMatrix<f64>> {
        let exact = self.exact.as_ref().ok_or_else(|| {
            AirError::Kernel(format!(
                "family '{}' has no exact transition-matrix representation",
                self.name
            ))
        })?;
        let p = exact(param)?;
        validate_stochastic(&p)?;
        Ok(p)
    }

    /// The closed-form invariant law for `param`, validated against the
    /// transition matrix when one is available.
    pub fn invariant_law(&self, param: &Param) -> Result<DVector<f64>> {
        let invariant = self.invariant.as_ref().ok_or_else(|| {
            AirError::Kernel(format!(
                "family '{}' has no closed-form invariant law",
                self.name
            ))
        })?;
        let pi = invariant(param)?;
        if let Some(exact) = &self.exact {
            validate_invariance(&exact(param)?, &pi)?;
        }
        Ok(pi)
    }
}

/// Check that `p` is a square row-stochastic matrix: nonnegative entries and
/// row sums within [`tol::ROW_SUM`] of one.
pub fn validate_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(AirError::Kernel(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for i in 0..p.nrows() {
        let mut sum = 0.0;
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if !(v >= 0.0) {
                return Err(AirError::Kernel(format!(
                    "negative or NaN entry P[{i}, {j}] = {v}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol::ROW_SUM {
            return Err(AirError::Kernel(format!(
                "row {i} sums to {sum}, off by {:e}",
                (sum - 1.0).abs()
            )));
        }
    }
    Ok(())
}

/// Check that `pi` is a law left-invariant for `p`: `|πᵀP - πᵀ|_∞` within
/// [`tol::INVARIANT_RESIDUAL`].
pub fn validate_invariance(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<()> {
    if pi.len() != p.nrows() {
        return Err(AirError::Kernel(format!(
            "invariant law has {} entries for a {}-state kernel",
            pi.len(),
            p.nrows()
        )));
    }
    let mass: f64 = pi.iter().sum();
    if pi.iter().any(|&x| !(x >= 0.0)) || (mass - 1.0).abs() > 1e-10 {
        return Err(AirError::Kernel(format!(
            "invariant law is not a probability vector (mass {mass})"
        )));
    }
    let residual = (p.transpose() * pi - pi).abs().max();
    if residual > tol::INVARIANT_RESIDUAL {
        return Err(AirError::Kernel(format!(
            "invariance residual {residual:e} exceeds {:e}",
            tol::INVARIANT_RESIDUAL
        )));
    }
    Ok(())
}

/// `P^k` by binary exponentiation; `k = 0` gives the identity.
pub fn kernel_power(p: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    let n = p.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = p.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

fn finite_step_from_exact(exact: ExactFn) -> StepFn {
    Arc::new(move |param, y, rng| {
        let i = match y.x {
            Point::Label(i) => i,
            _ => {
                return Err(AirError::Kernel(
                    "finite-space kernel applied to a coordinate state".into(),
                ))
            }
        };
        let p = exact(param)?;
        if i >= p.nrows() {
            return Err(AirError::Kernel(format!(
                "state label {i} outside a {}-state space",
                p.nrows()
            )));
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = p.ncols() - 1;
        for j in 0..p.ncols() {
            acc += p[(i, j)];
            if u < acc {
                pick = j;
                break;
            }
        }
        Ok((AugmentedState::labeled(pick, y.phi), true))
    })
}

/// The two-state flip matrix `[[1-γ, γ], [γ, 1-γ]]`.
pub fn two_state_matrix(gamma: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(AirError::Domain(format!(
            "two-state flip probability must lie in [0, 1], got {gamma}"
        )));
    }
    Ok(DMatrix::from_row_slice(
        2,
        2,
        &[1.0 - gamma, gamma, gamma, 1.0 - gamma],
    ))
}

/// The two-state family with `Param::Scalar(γ)` and uniform invariant law.
pub fn two_state_family() -> KernelFamily {
    let exact: ExactFn = Arc::new(|param: &Param| two_state_matrix(param.as_scalar()?));
    KernelFamily::new(
        "two_state",
        SpaceKind::Finite(2),
        finite_step_from_exact(exact.clone()),
    )
    .with_exact(exact)
    .with_invariant(Arc::new(|_: &Param| {
        Ok(DVector::from_element(2, 0.5))
    }))
}

/// A symmetric doubly stochastic matrix: a random convex mix of
/// `(Π + Πᵀ)/2` over a few random permutations `Π`.
fn random_symmetric_doubly_stochastic(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mixes = 3;
    let mut weights: Vec<f64> = (0..mixes).map(|_| -f64::ln(rng.gen::<f64>())).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut s = DMatrix::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    for &w in &weights {
        perm.shuffle(rng);
        for (i, &j) in perm.iter().enumerate() {
            s[(i, j)] += 0.5 * w;
            s[(j, i)] += 0.5 * w;
        }
    }
    s
}

/// Metropolis kernel with symmetric proposal `s` and target `nu`, exactly
/// `nu`-reversible by construction.
fn metropolis_from_symmetric(s: &DMatrix<f64>, nu: &DVector<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let a = if nu[j] >= nu[i] { 1.0 } else { nu[j] / nu[i] };
            q[(i, j)] = s[(i, j)] * a;
            off += q[(i, j)];
        }
        q[(i, i)] = 1.0 - off;
    }
    q
}

/// A family `P_j = (1-α) Q_j + α 1 νᵀ`, `j = 0, .., grid-1`, on `n` states.
///
/// The mutual law `ν` is drawn at random from `seed` and every `Q_j` is an
/// exactly `ν`-reversible Metropolis kernel, so the whole family shares the
/// invariant law `ν` and contracts in total variation at rate at most
/// `1 - α` regardless of which parameters an adaptive run visits. With
/// `α = 1` every kernel is the i.i.d. sampler `1 νᵀ`.
pub fn doeblin_family(n: usize, alpha: f64, grid: usize, seed: u64) -> Result<KernelFamily> {
    if n < 2 {
        return Err(AirError::Domain(format!(
            "doeblin family needs at least 2 states, got {n}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AirError::Domain(format!(
            "doeblin constant must lie in (0, 1], got {alpha}"
        )));
    }
    if grid == 0 {
        return Err(AirError::Domain("empty doeblin parameter grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // `1 + Exp(1)` weights keep the law bounded away from zero.
    let raw: Vec<f64> = (0..n).map(|_| 1.0 - f64::ln(rng.gen::<f64>())).collect();
    let total: f64 = raw.iter().sum();
    let nu = DVector::from_iterator(n, raw.iter().map(|x| x / total));
    let mut matrices = Vec::with_capacity(grid);
    for _ in 0..grid {
        let s = random_symmetric_doubly_stochastic(n, &mut rng);
        let q = metropolis_from_symmetric(&s, &nu);
        let mut p = q * (1.0 - alpha);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += alpha * nu[j];
            }
        }
        matrices.push(p);
    }
    let matrices = Arc::new(matrices);
    let nu_shared = nu.clone();
    let exact: ExactFn = {
        let matrices = matrices.clone();
        Arc::new(move |param: &Param| {
            let j = param.as_index()?;
            matrices.get(j).cloned().ok_or_else(|| {
                AirError::Kernel(format!(
                    "doeblin parameter index {j} outside grid of {}",
                    matrices.len()
                ))
            })
        })
    };
    Ok(KernelFamily::new(
        format!("doeblin_{n}state"),
        SpaceKind::Finite(n),
        finite_step_from_exact(exact.clone()),
    )
    .with_exact(exact)
    .with_invariant(Arc::new(move |_: &Param| Ok(nu_shared.clone())))
    .with_params((0..grid).map(Param::Index).collect())
    .with_doeblin_alpha(alpha))
}

/// Metropolis transition matrix on a finite grid for log-density values
/// `logpi`, proposing uniformly over the `2 width` nearest indices.
///
/// Out-of-range proposals are rejected in place, which keeps the proposal
/// symmetric, so detailed balance with respect to the normalised law
/// `π ∝ exp(logpi)` is exact.
pub fn grid_metropolis_matrix(logpi: &[f64], width: usize) -> Result<DMatrix<f64>> {
    let n = logpi.len();
    if n < 2 {
        return Err(AirError::Domain(format!(
            "grid needs at least 2 points, got {n}"
        )));
    }
    if width == 0 || logpi.iter().any(|x| !x.is_finite()) {
        return Err(AirError::Domain(
            "grid metropolis needs width >= 1 and finite log-densities".into(),
        ));
    }
    let prop = 1.0 / (2 * width) as f64;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for d in 1..=width {
            for j in [i.checked_sub(d), i.checked_add(d)].into_iter().flatten() {
                if j >= n {
                    continue;
                }
                let a = (logpi[j] - logpi[i]).exp().min(1.0);
                p[(i, j)] = prop * a;
                off += p[(i, j)];
            }
        }
        p[(i, i)] = 1.0 - off;
    }
    Ok(p)
}

/// Normalised law `π ∝ exp(logpi)` on the grid.
pub fn grid_law(logpi: &[f64]) -> DVector<f64> {
    let top = logpi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logpi.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    DVector::from_iterator(weights.len(), weights.iter().map(|w| w / total))
}

/// The grid-Metropolis family with `Param::Index(width)`, `width >= 1`.
///
/// Every width shares the same invariant law `π ∝ exp(logpi)`, making the
/// family a finite-state stand-in for adapting a continuous Metropolis
/// sampler's step size.
pub fn grid_metropolis_family(logpi: Vec<f64>, max_width: usize) -> Result<KernelFamily> {
    if max_width == 0 {
        return Err(AirError::Domain("max_width must be at least 1".into()));
    }
    // Validate eagerly so construction fails fast on bad grids.
    grid_metropolis_matrix(&logpi, 1)?;
    let n = logpi.len();
    let law = grid_law(&logpi);
    let logpi = Arc::new(logpi);
    let exact: ExactFn = {
        let logpi = logpi.clone();
        Arc::new(move |param: &Param| {
            let w = param.as_index()?;
            grid_metropolis_matrix(&logpi, w)
        })
    };
    Ok(KernelFamily::new(
        format!("grid_metropolis_{n}"),
        SpaceKind::Finite(n),
        finite_step_from_exact(exact.clone()),
    )
    .with_exact(exact)
    .with_invariant(Arc::new(move |_: &Param| Ok(law.clone())))
    .with_params((1..=max_width).map(Param::Index).collect()))
}

/// One random-walk Metropolis transition: propose `x + sqrt(γ) ξ` with
/// standard normal `ξ` and accept with probability
/// `min(1, exp(logpi(x') - logpi(x)))`.
///
/// A proposal with non-finite log-density is rejected outright; a current
/// state with non-finite log-density accepts any finite proposal, so chains
/// started outside the support recover.
pub fn rwm_step(
    x: &[f64],
    gamma: f64,
    logpi: &dyn Fn(&[f64]) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, bool)> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(AirError::Domain(format!(
            "random-walk step variance must be positive and finite, got {gamma}"
        )));
    }
    let scale = gamma.sqrt();
    let proposal: Vec<f64> = x
        .iter()
        .map(|xi| {
            let z: f64 = StandardNormal.sample(rng);
            xi + scale * z
        })
        .collect();
    let lp_new = logpi(&proposal);
    // Draw the acceptance variable unconditionally to keep the RNG stream
    // independent of the accept/reject outcome.
    let u: f64 = rng.gen();
    if !lp_new.is_finite() {
        return Ok((x.to_vec(), false));
    }
    let lp_old = logpi(x);
    let accept = !lp_old.is_finite() || u.ln() < lp_new - lp_old;
    if accept {
        Ok((proposal, true))
    } else {
        Ok((x.to_vec(), false))
    }
}

/// Target log-density on `R^dim`, shared and thread-safe.
pub type LogDensity = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Random-walk Metropolis family on `R^dim` with `Param::Scalar(γ)` the
/// proposal variance. Simulation only: no exact representation.
pub fn rwm_family(logpi: LogDensity, dim: usize) -> KernelFamily {
    let step: StepFn = Arc::new(move |param, y, rng| {
        let gamma = param.as_scalar()?;
        let x = match &y.x {
            Point::Coords(x) => x,
            _ => {
                return Err(AirError::Kernel(
                    "random-walk kernel applied to a finite-space label".into(),
                ))
            }
        };
        let (next, accepted) = rwm_step(x, gamma, logpi.as_ref(), rng)?;
        Ok((
            AugmentedState {
                x: Point::Coords(next),
                phi: y.phi,
            },
            accepted,
        ))
    });
    KernelFamily::new("rwm", SpaceKind::Real(dim), step)
}
