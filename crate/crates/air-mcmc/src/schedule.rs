//! Adaptation-time schedules.
//!
//! An increasingly-rare schedule adapts only at the times
//! `T_m = sum_{j=1}^m k_j` with window lengths `k_j = ceil(j^beta)` for a
//! fixed exponent `beta > 0`, and `T_0 = 0`. The parameter driving the chain
//! is constant on every index window `[T_m, T_{m+1})`, so the fraction of
//! steps at which adaptation happens vanishes like `n^{-beta/(1+beta)}`.
//!
//! `window_length` evaluates `ceil(j^beta)` through an exact integer power
//! when `beta` is integral and otherwise through `powf` with a
//! nearest-integer snap, so that exact powers are never perturbed by float
//! rounding and adaptation times cannot shift between platforms. Prefix sums
//! `T_m` are cached behind an `RwLock`, and `window_index` binary-searches
//! the cache; the linear scan survives in the tests as an oracle.

use std::sync::RwLock;

use crate::error::{AirError, Result};
use crate::tol;

/// One adaptation window: the unique `m` with `T_m <= n+1 < T_{m+1}`
/// together with the half-open index range `[T_m, T_{m+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    /// Window index `m`.
    pub m: u64,
    /// Inclusive start `T_m`.
    pub start: u64,
    /// Exclusive end `T_{m+1}`.
    pub end: u64,
}

/// Canonical increasingly-rare schedule with `k_j = ceil(j^beta)`.
///
/// Immutable after construction; the internal prefix-sum cache only ever
/// grows and is safe for concurrent readers.
#[derive(Debug)]
pub struct AirSchedule {
    beta: f64,
    /// `prefix[m] = T_m`; `prefix[0] = 0`.
    prefix: RwLock<Vec<u64>>,
}

impl AirSchedule {
    /// Create a schedule with exponent `beta > 0`.
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(AirError::Domain(format!(
                "schedule exponent beta must be finite and positive, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            prefix: RwLock::new(vec![0]),
        })
    }

    /// The schedule exponent.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Window length `k_j = ceil(j^beta)` for `j >= 1`.
    pub fn window_length(&self, j: u64) -> Result<u64> {
        if j == 0 {
            return Err(AirError::Domain(
                "window_length is defined for j >= 1".into(),
            ));
        }
        // Exact path for integral exponents: no float power involved at all.
        if self.beta.fract() == 0.0 && self.beta <= 64.0 {
            let e = self.beta as u32;
            let mut acc: u128 = 1;
            for _ in 0..e {
                acc = acc.checked_mul(j as u128).ok_or_else(|| {
                    AirError::Overflow(format!("window length {j}^{e} exceeds u128"))
                })?;
            }
            return u64::try_from(acc).map_err(|_| {
                AirError::Overflow(format!("window length {j}^{e} exceeds u64"))
            });
        }
        let t = (j as f64).powf(self.beta);
        if !t.is_finite() || t >= u64::MAX as f64 {
            return Err(AirError::Overflow(format!(
                "window length {j}^{} exceeds u64",
                self.beta
            )));
        }
        // Nearest-integer snap: an exact power computed with rounding error in
        // either direction must not change the ceiling.
        let nearest = t.round();
        let k = if (t - nearest).abs() <= tol::POWER_SNAP * nearest.max(1.0) {
            nearest
        } else {
            t.ceil()
        };
        Ok(k as u64)
    }

    /// Adaptation time `T_m = sum_{j=1}^m k_j`, with `T_0 = 0`.
    pub fn adaptation_time(&self, m: u64) -> Result<u64> {
        self.ensure_windows(m)?;
        let prefix = self.prefix.read().expect("schedule cache poisoned");
        Ok(prefix[m as usize])
    }

    /// The window containing step `n+1`: the unique `m` with
    /// `T_m <= n+1 < T_{m+1}`.
    pub fn window_index(&self, n: u64) -> Result<Window> {
        let target = n
            .checked_add(1)
            .ok_or_else(|| AirError::Overflow("step index n+1 exceeds u64".into()))?;
        self.ensure_covers(target)?;
        let prefix = self.prefix.read().expect("schedule cache poisoned");
        // Number of prefix entries <= target, minus one, is the window index.
        let m = prefix.partition_point(|&t| t <= target) - 1;
        Ok(Window {
            m: m as u64,
            start: prefix[m],
            end: prefix[m + 1],
        })
    }

    /// Number of adaptations completed by step `n`: `#{m >= 1 : T_m <= n}`.
    ///
    /// This is the count of parameter changes that can have influenced
    /// `Y_1..Y_n`, which differs from `window_index(n).m` exactly when
    /// `n + 1` is itself an adaptation time.
    pub fn completed_adaptations(&self, n: u64) -> Result<u64> {
        self.ensure_covers(n.saturating_add(1))?;
        let prefix = self.prefix.read().expect("schedule cache poisoned");
        Ok((prefix.partition_point(|&t| t <= n) - 1) as u64)
    }

    /// Whether `n` is an adaptation time `T_m` for some `m >= 1`.
    pub fn is_adaptation_time(&self, n: u64) -> Result<bool> {
        if n == 0 {
            return Ok(false);
        }
        self.ensure_covers(n)?;
        let prefix = self.prefix.read().expect("schedule cache poisoned");
        Ok(prefix.binary_search(&n).is_ok())
    }

    /// Explicit growth envelope for `T_m`:
    /// `m^{1+beta}/(1+beta) <= T_m <= (2^{1+beta}/(1+beta) + 1) * m^{1+beta}`.
    ///
    /// The constants are the ones used by the remainder bound, so they are
    /// exposed rather than folded into the audit.
    pub fn growth_envelope(&self, m: u64) -> (f64, f64) {
        let b1 = 1.0 + self.beta;
        let mp = (m as f64).powf(b1);
        let lower = mp / b1;
        let upper = (2f64.powf(b1) / b1 + 1.0) * mp;
        (lower, upper)
    }

    /// Envelope constant `c_beta = 1/(1+beta)` from the lower bound.
    pub fn envelope_lower_constant(&self) -> f64 {
        1.0 / (1.0 + self.beta)
    }

    /// Grow the prefix cache to hold `T_0..T_m`.
    fn ensure_windows(&self, m: u64) -> Result<()> {
        {
            let prefix = self.prefix.read().expect("schedule cache poisoned");
            if prefix.len() as u64 > m {
                return Ok(());
            }
        }
        let mut prefix = self.prefix.write().expect("schedule cache poisoned");
        while (prefix.len() as u64) <= m {
            let j = prefix.len() as u64;
            let k = self.window_length(j)?;
            let last = *prefix.last().expect("prefix never empty");
            let next = last.checked_add(k).ok_or_else(|| {
                AirError::Overflow(format!("adaptation time T_{j} exceeds u64"))
            })?;
            prefix.push(next);
        }
        Ok(())
    }

    /// Grow the prefix cache until the last entry strictly exceeds `target`.
    fn ensure_covers(&self, target: u64) -> Result<()> {
        loop {
            {
                let prefix = self.prefix.read().expect("schedule cache poisoned");
                if *prefix.last().expect("prefix never empty") > target {
                    return Ok(());
                }
            }
            let mut prefix = self.prefix.write().expect("schedule cache poisoned");
            while *prefix.last().expect("prefix never empty") <= target {
                let j = prefix.len() as u64;
                let k = self.window_length(j)?;
                let last = *prefix.last().expect("prefix never empty");
                let next = last.checked_add(k).ok_or_else(|| {
                    AirError::Overflow(format!("adaptation time T_{j} exceeds u64"))
                })?;
                prefix.push(next);
            }
        }
    }
}
