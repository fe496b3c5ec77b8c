//! Seeded random-grid comparison of the simulator against the closed forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formulas::{ideal_moments, lossy_moments};
use crate::protocol::{run_ensemble, ProtocolParams};
use crate::real::{lit, Real};

/// Default pass threshold on the worst relative error.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub n_points: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Negative control: run the simulator with the phase sign flipped.
    pub corrupt_convention: bool,
}

impl VerifyOptions {
    pub fn new(n_points: usize, seed: u64) -> Self {
        Self {
            n_points,
            seed,
            tolerance: TOLERANCE,
            corrupt_convention: false,
        }
    }
}

/// The single largest discrepancy seen.
#[derive(Clone, Debug, PartialEq)]
pub struct Offender<T> {
    pub params: ProtocolParams<T>,
    pub quantity: &'static str,
    pub simulated: T,
    pub closed_form: T,
    pub rel_error: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport<T> {
    pub n_points: usize,
    pub max_rel_error: T,
    pub worst: Option<Offender<T>>,
    pub passed: bool,
}

/// Relative difference; exact agreement (including at zero) counts as zero.
pub fn rel_error<T: Real>(a: T, b: T) -> T {
    if a == b {
        return T::zero();
    }
    let scale = a.abs().max(b.abs());
    if scale > T::zero() {
        (a - b).abs() / scale
    } else {
        T::infinity()
    }
}

/// Draws one grid point: α∈[0,3], φ∈[−1,1], r∈[0,3], m∈[0,50],
/// η₁,η₂∈[0.3,1], n_th∈[0,0.1], unit gains.
pub fn random_point<T: Real, R: Rng + ?Sized>(rng: &mut R) -> ProtocolParams<T> {
    let alpha = rng.random_range(0.0..=3.0);
    let phi = rng.random_range(-1.0..=1.0);
    let r = rng.random_range(0.0..=3.0);
    let m = rng.random_range(0..=50usize);
    let eta1 = rng.random_range(0.3..=1.0);
    let eta2 = rng.random_range(0.3..=1.0);
    let n_th = rng.random_range(0.0..=0.1);
    ProtocolParams::new(lit(alpha), lit(phi), lit(r), m)
        .with_losses(lit(eta1), lit(eta2))
        .with_thermal(lit(n_th))
}

/// Deviations of one point, as `(quantity, simulated, closed form)`.
pub fn compare_point<T: Real>(
    params: &ProtocolParams<T>,
    corrupt_convention: bool,
) -> Result<Vec<(&'static str, T, T)>> {
    let simulate = |p: &ProtocolParams<T>| {
        let p = if corrupt_convention { p.with_phi(-p.phi) } else { *p };
        run_ensemble(&p)
    };
    let sim = simulate(params)?;
    let lossy = lossy_moments(params)?;
    let ideal_params = params.with_losses(T::one(), T::one()).with_thermal(T::zero());
    let ideal_sim = simulate(&ideal_params)?;
    let ideal = ideal_moments(params.alpha, params.phi, params.r, params.m)?;
    Ok(vec![
        ("mean_x", sim.mean_x, lossy.mean_x),
        ("var_x", sim.var_x, lossy.var_x),
        ("sigma", sim.sigma, lossy.sigma),
        ("n_total", sim.n_total, lossy.n_total),
        ("ideal mean_x", ideal_sim.mean_x, ideal.mean_x),
        ("ideal var_x", ideal_sim.var_x, ideal.var_x),
        ("ideal sigma", ideal_sim.sigma, ideal.sigma),
        ("ideal n_total", ideal_sim.n_total, ideal.n_total),
        ("ideal n_m", ideal_sim.per_pass_photons[params.m], ideal.n_m),
    ])
}

/// Runs the random-grid comparison. A point where either side cannot be
/// evaluated counts as an infinite error.
pub fn verify<T: Real>(options: &VerifyOptions) -> Result<VerifyReport<T>> {
    if options.n_points == 0 {
        return Err(Error::invalid("n_points", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut max_rel = T::zero();
    let mut worst: Option<Offender<T>> = None;
    for _ in 0..options.n_points {
        let params = random_point::<T, _>(&mut rng);
        let rows = match compare_point(&params, options.corrupt_convention) {
            Ok(rows) => rows,
            Err(_) => vec![("evaluation", T::nan(), T::nan())],
        };
        for (quantity, simulated, closed_form) in rows {
            let err = if simulated.is_nan() || closed_form.is_nan() {
                T::infinity()
            } else {
                rel_error(simulated, closed_form)
            };
            if worst.is_none() || err > max_rel {
                max_rel = max_rel.max(err);
                worst = Some(Offender {
                    params,
                    quantity,
                    simulated,
                    closed_form,
                    rel_error: err,
                });
            }
        }
    }
    Ok(VerifyReport {
        n_points: options.n_points,
        max_rel_error: max_rel,
        worst,
        passed: max_rel < lit(options.tolerance),
    })
}
