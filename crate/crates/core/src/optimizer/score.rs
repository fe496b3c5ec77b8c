//! Fast scoring of a strategy at `φ = 0`.
//!
//! With no phase shift the rotation is the identity, so every quantity the
//! optimizer needs (probe photons per pass, quadrature variances, the mean
//! derivative) follows a scalar linear recurrence. Stepping `m` passes is then
//! a 3×3 matrix power, which costs `O(log m)` instead of a full propagation.
//! All matrix entries are non-negative, so the powers are free of cancellation.

use super::{Constraint, Gains};
use crate::real::{from_usize, lit, Real};

type M3<T> = [[T; 3]; 3];

fn mul<T: Real>(a: &M3<T>, b: &M3<T>) -> M3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

fn pow<T: Real>(base: &M3<T>, mut n: usize) -> M3<T> {
    let mut acc = [[T::zero(); 3]; 3];
    for (i, row) in acc.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let mut b = *base;
    while n > 0 {
        if n & 1 == 1 {
            acc = mul(&acc, &b);
        }
        n >>= 1;
        if n > 0 {
            b = mul(&b, &b);
        }
    }
    acc
}

/// For `v ← a·v + c` started at `v0`: `(v_n, Σ_{k≤n} v_k)`.
fn affine_run<T: Real>(a: T, c: T, v0: T, n: usize) -> (T, T) {
    let z = T::zero();
    let o = T::one();
    // state (v, running sum, 1)
    let p = pow(&[[a, z, c], [o, o, z], [z, z, o]], n);
    let v_n = p[0][0] * v0 + p[0][2];
    let partial = p[1][0] * v0 + p[1][2];
    (v_n, partial + v_n)
}

/// Teleportation-added noise on `x` and `p` for the given gains:
/// `Var(x₃ − g_x x₂)` and `Var(p₃ + g_p p₂)` of the lossy resource.
pub(crate) fn added_noise<T: Real>(r: T, eta2: T, n_th: T, g: T) -> T {
    let quarter = lit::<T>(0.25);
    let one = T::one();
    // (1+g²)cosh 2r − 2g sinh 2r, written without cancellation
    let squeezed = ((one - g).powi(2) * (r + r).exp() + (one + g).powi(2) * (-(r + r)).exp()) / lit(2.0);
    quarter * (eta2 * squeezed + (one + g * g) * (one - eta2) * (one + n_th + n_th))
}

/// Photon coefficients, final variance and unit-amplitude slope at `φ = 0`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PhaseZero<T> {
    /// `n_total = a·α² + b`.
    pub a: T,
    pub b: T,
    pub var_x: T,
    /// `d⟨x⟩/dφ` per unit `α`.
    pub slope: T,
}

pub(crate) fn phase_zero<T: Real>(m: usize, gains: Gains<T>, c: &Constraint<T>) -> PhaseZero<T> {
    let eta = c.eta1;
    let s = eta.sqrt();
    let quarter = lit::<T>(0.25);
    let leak = (T::one() - eta) * quarter;
    let (gx, gp) = (gains.g_x, gains.g_p);

    let nx = added_noise(c.r, c.eta2, c.n_th, gx);
    let np = added_noise(c.r, c.eta2, c.n_th, gp);
    let (vx_m, vx_sum) = affine_run(eta * gx * gx, gx * gx * leak + nx, quarter, m);
    let (_, vp_sum) = affine_run(eta * gp * gp, gp * gp * leak + np, quarter, m);
    let (_, p2_sum) = affine_run(eta * gp * gp, T::zero(), T::one(), m);

    // (dx, p) per unit α: dx ← g_x s (dx + p), p ← g_p s p
    let z = T::zero();
    let step = pow(&[[gx * s, gx * s, z], [z, gp * s, z], [z, z, T::one()]], m);
    let dx_m = step[0][1];
    let p_m = step[1][1];

    PhaseZero {
        a: p2_sum,
        b: vx_sum + vp_sum - from_usize::<T>(m + 1) * lit(0.5),
        var_x: eta * vx_m + leak,
        slope: s * (dx_m + p_m),
    }
}

/// Fast counterpart of [`super::evaluate`]. Infeasible budgets come back with
/// `feasible = false`; `None` means the sensitivity is undefined or overflowed.
pub(crate) fn score<T: Real>(m: usize, gains: Gains<T>, c: &Constraint<T>) -> Option<Fast<T>> {
    let pz = phase_zero(m, gains, c);
    let budget = c.n_total_budget;
    let feasible = budget >= pz.b;
    if !feasible {
        return Some(Fast {
            feasible,
            enhancement: T::zero(),
        });
    }
    let alpha = ((budget - pz.b) / pz.a).sqrt();
    let slope = alpha * pz.slope;
    if !(slope > T::zero() && slope.is_finite() && pz.var_x.is_finite()) {
        return None;
    }
    let sigma = pz.var_x.sqrt() / slope;
    let sigma_coh = T::one() / (lit::<T>(2.0) * (c.eta1 * budget).sqrt());
    let enhancement = sigma_coh / sigma;
    enhancement.is_finite().then_some(Fast { feasible, enhancement })
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Fast<T> {
    pub feasible: bool,
    pub enhancement: T,
}
