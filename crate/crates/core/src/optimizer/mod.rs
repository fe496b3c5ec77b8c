//! Best teleportation strategy under squeezing, photon and loss budgets.
//!
//! For each teleportation count the probe amplitude is fixed by the photon
//! budget, the feedback gains are either pinned to one or searched, and the
//! sensitivity at `φ = 0` is compared with a coherent probe carrying the same
//! number of photons through the same phase-shift loss.

mod score;
pub mod simplex;
mod sweep;

pub use sweep::{sweep, SweepGrid, SweepRow};

use crate::error::{ensure_non_negative, ensure_unit_interval, Error, Result};
use crate::formulas::{coherent_baseline_sigma, effective_squeezing};
use crate::protocol::{photon_budget_coefficients, run_ensemble, ProtocolParams};
use crate::real::{lit, Real};
use simplex::{minimize, SimplexOptions};

/// Consecutive non-improving teleportation counts tolerated once the unit-gain budget runs out.
pub const PATIENCE: usize = 50;
/// Upper edge of the gain search box.
pub const GAIN_MAX: f64 = 2.0;
/// Lower edge of the gain search box; the box is `(0, GAIN_MAX]`.
pub const GAIN_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint<T> {
    pub r: T,
    pub n_total_budget: T,
    pub eta1: T,
    pub eta2: T,
    pub n_th: T,
    /// Pin `g_x = g_p = 1` instead of searching.
    pub unit_gains: bool,
    /// User cap on the teleportation count.
    pub m_max: Option<usize>,
}

impl<T: Real> Constraint<T> {
    /// Lossless, searched gains, default scan cap.
    pub fn new(r: T, n_total_budget: T) -> Self {
        Self {
            r,
            n_total_budget,
            eta1: T::one(),
            eta2: T::one(),
            n_th: T::zero(),
            unit_gains: false,
            m_max: None,
        }
    }

    pub fn with_losses(mut self, eta1: T, eta2: T) -> Self {
        self.eta1 = eta1;
        self.eta2 = eta2;
        self
    }

    pub fn with_thermal(mut self, n_th: T) -> Self {
        self.n_th = n_th;
        self
    }

    pub fn with_unit_gains(mut self, unit_gains: bool) -> Self {
        self.unit_gains = unit_gains;
        self
    }

    pub fn with_m_max(mut self, m_max: usize) -> Self {
        self.m_max = Some(m_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("r", self.r)?;
        if !(self.n_total_budget.is_finite() && self.n_total_budget > T::zero()) {
            return Err(Error::invalid("n_total", "must be finite and > 0"));
        }
        ensure_unit_interval("eta1", self.eta1)?;
        ensure_unit_interval("eta2", self.eta2)?;
        ensure_non_negative("n_th", self.n_th)?;
        Ok(())
    }

    /// Largest teleportation count the scan will visit: the user cap, or
    /// `20·⌈e^{2 r_lim}⌉` if smaller.
    pub fn m_cap(&self) -> Result<usize> {
        let r_lim = effective_squeezing(self.r, self.eta2, self.n_th)?;
        let scale = (r_lim + r_lim).exp().ceil().to_f64().unwrap_or(f64::INFINITY);
        let heuristic = (20.0 * scale).min(usize::MAX as f64 / 2.0) as usize;
        Ok(self.m_max.map_or(heuristic, |cap| cap.min(heuristic)))
    }

    fn params(&self, m: usize, gains: Gains<T>, alpha: T) -> ProtocolParams<T> {
        ProtocolParams::new(alpha, T::zero(), self.r, m)
            .with_gains(gains.g_x, gains.g_p)
            .with_losses(self.eta1, self.eta2)
            .with_thermal(self.n_th)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gains<T> {
    pub g_x: T,
    pub g_p: T,
}

impl<T: Real> Gains<T> {
    pub fn new(g_x: T, g_p: T) -> Self {
        Self { g_x, g_p }
    }

    pub fn unit() -> Self {
        Self::new(T::one(), T::one())
    }
}

/// One scored strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub m: usize,
    pub gains: Gains<T>,
    pub alpha: T,
    pub sigma: T,
    pub sigma_coh: T,
    /// `σ_coh / σ`.
    pub enhancement: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum<T> {
    pub m: usize,
    pub alpha: T,
    pub g_x: T,
    pub g_p: T,
    pub sigma: T,
    pub sigma_coh: T,
    pub enhancement: T,
    /// `10·log₁₀(σ_coh²/σ²)`.
    pub enhancement_db: T,
    pub feasible: bool,
    /// The gain search ended on the edge of its box.
    pub gain_at_boundary: bool,
}

impl<T: Real> Optimum<T> {
    pub fn infeasible() -> Self {
        let nan = T::nan();
        Self {
            m: 0,
            alpha: nan,
            g_x: nan,
            g_p: nan,
            sigma: nan,
            sigma_coh: nan,
            enhancement: nan,
            enhancement_db: nan,
            feasible: false,
            gain_at_boundary: false,
        }
    }

    fn from_evaluation(e: &Evaluation<T>) -> Self {
        let tol = lit::<T>(1e-5);
        let near = |g: T| g <= lit::<T>(GAIN_MIN) + tol || g >= lit::<T>(GAIN_MAX) - tol;
        Self {
            m: e.m,
            alpha: e.alpha,
            g_x: e.gains.g_x,
            g_p: e.gains.g_p,
            sigma: e.sigma,
            sigma_coh: e.sigma_coh,
            enhancement: e.enhancement,
            enhancement_db: lit::<T>(20.0) * e.enhancement.log10(),
            feasible: true,
            gain_at_boundary: near(e.gains.g_x) || near(e.gains.g_p),
        }
    }
}

/// Probe amplitude that spends exactly the photon budget, or [`Error::Infeasible`]
/// when teleportation noise alone exceeds it.
pub fn solve_alpha<T: Real>(m: usize, gains: Gains<T>, constraint: &Constraint<T>) -> Result<T> {
    constraint.validate()?;
    let (a, b) = photon_budget_coefficients(&constraint.params(m, gains, T::zero()))?;
    if !(a > T::zero()) {
        return Err(Error::Internal(format!("photon coefficient A = {a} must be positive")));
    }
    let budget = constraint.n_total_budget;
    if budget < b {
        return Err(Error::Infeasible {
            budget: budget.to_f64().unwrap_or(f64::NAN),
            floor: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(((budget - b) / a).sqrt())
}

/// Sensitivity enhancement of `(m, gains)` at `φ = 0` over the matched coherent probe.
pub fn evaluate<T: Real>(m: usize, gains: Gains<T>, constraint: &Constraint<T>) -> Result<Evaluation<T>> {
    let alpha = solve_alpha(m, gains, constraint)?;
    let moments = run_ensemble(&constraint.params(m, gains, alpha))?;
    let sigma_coh = coherent_baseline_sigma(constraint.n_total_budget, T::zero(), constraint.eta1)?;
    Ok(Evaluation {
        m,
        gains,
        alpha,
        sigma: moments.sigma,
        sigma_coh,
        enhancement: sigma_coh / moments.sigma,
    })
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    gains: Gains<T>,
    enhancement: T,
}

fn better<T: Real>(candidate: &Candidate<T>, incumbent: &Candidate<T>) -> bool {
    if candidate.enhancement != incumbent.enhancement {
        return candidate.enhancement > incumbent.enhancement;
    }
    (candidate.gains.g_x, candidate.gains.g_p) < (incumbent.gains.g_x, incumbent.gains.g_p)
}

fn fast_enhancement<T: Real>(m: usize, gains: Gains<T>, constraint: &Constraint<T>) -> Option<T> {
    score::score(m, gains, constraint)
        .filter(|s| s.feasible)
        .map(|s| s.enhancement)
}

/// Best gains for a fixed teleportation count: the 5×5 seed grid over
/// `[0.5, 1.5]²` plus simplex refinement from `(1, 1)` and from the best seed.
/// Returns the gains and their enhancement. Without teleportation the gains
/// are unused and reported as `(1, 1)`.
pub fn optimize_gains<T: Real>(m: usize, constraint: &Constraint<T>) -> Option<(Gains<T>, T)> {
    if m == 0 {
        return fast_enhancement(0, Gains::unit(), constraint).map(|e| (Gains::unit(), e));
    }
    let candidate = |g: [T; 2]| {
        let gains = Gains::new(g[0], g[1]);
        fast_enhancement(m, gains, constraint).map(|enhancement| Candidate { gains, enhancement })
    };
    let mut best: Option<Candidate<T>> = None;
    let offer = |c: Candidate<T>, best: &mut Option<Candidate<T>>| {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            *best = Some(c);
        }
    };

    let levels: Vec<T> = (0..5).map(|i| lit::<T>(0.5 + 0.25 * i as f64)).collect();
    for &gx in &levels {
        for &gp in &levels {
            if let Some(c) = candidate([gx, gp]) {
                offer(c, &mut best);
            }
        }
    }
    // nothing on the grid scores: the simplex would only wander over +∞
    let seed = best?;
    let opts = SimplexOptions::new([lit(GAIN_MIN); 2], [lit(GAIN_MAX); 2]);
    let objective = |g: [T; 2]| candidate(g).map_or(T::infinity(), |c| -c.enhancement);
    let mut starts = vec![[T::one(), T::one()]];
    let seed = [seed.gains.g_x, seed.gains.g_p];
    if seed != starts[0] {
        starts.push(seed);
    }
    for start in starts {
        let res = minimize(objective, start, &opts);
        if let Some(c) = candidate(res.point) {
            offer(c, &mut best);
        }
    }
    best.map(|b| (b.gains, b.enhancement))
}

/// Scans teleportation counts and returns the strategy with the largest enhancement.
///
/// Ties go to the smaller `m`. The scan stops at [`Constraint::m_cap`], or
/// once the unit-gain photon floor exceeds the budget and the best result has
/// not improved for [`PATIENCE`] consecutive counts. The winner is re-scored
/// with [`evaluate`], so the reported numbers come from the full simulator.
pub fn optimize<T: Real>(constraint: &Constraint<T>) -> Result<Optimum<T>> {
    constraint.validate()?;
    let cap = constraint.m_cap()?;
    let mut best: Option<(usize, Gains<T>, T)> = None;
    let mut stale = 0usize;
    let mut exhausted = false;
    for m in 0..=cap {
        let unit = score::score(m, Gains::unit(), constraint);
        if matches!(unit, Some(s) if !s.feasible) {
            exhausted = true;
        }
        let candidate = if constraint.unit_gains {
            unit.filter(|s| s.feasible).map(|s| (Gains::unit(), s.enhancement))
        } else {
            optimize_gains(m, constraint)
        };
        match candidate {
            Some((gains, e)) if best.is_none_or(|(_, _, b)| e > b) => {
                best = Some((m, gains, e));
                stale = 0;
            }
            _ => stale += 1,
        }
        if exhausted && stale >= PATIENCE {
            break;
        }
    }
    match best {
        None => Ok(Optimum::infeasible()),
        Some((m, gains, _)) => Ok(Optimum::from_evaluation(&evaluate(m, gains, constraint)?)),
    }
}
