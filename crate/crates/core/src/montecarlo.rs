//! Single-shot trajectories of the protocol with sampled homodyne outcomes.
//!
//! Each round samples `p′₁`, conditions, samples `x′₂`, conditions, and
//! displaces the receiver by `(g_x√2·x′₂, g_p√2·p′₁)`. The conditional
//! covariances of a Gaussian trajectory do not depend on the outcomes, so the
//! per-round variances and regression vectors are computed once per parameter
//! point with [`GaussianState::homodyne_condition`]; each trajectory then only
//! moves means. Trajectory `i` of a run with seed `s` draws from ChaCha8 stream
//! `i` of key `s`, so results do not depend on how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{AffineMap, GaussianState, Quadrature};
use crate::protocol::{lossy_resource, ProtocolParams};
use crate::real::{from_usize, lit, Real};

/// Trajectories per work unit. Fixed so the reduction order never changes.
const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryResult<T> {
    /// Sampled final homodyne outcome.
    pub final_x: T,
    /// Photons in the conditional probe state at the start of each pass.
    pub per_pass_photons: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEstimate<T> {
    pub mean_x_hat: T,
    /// Unbiased sample variance.
    pub var_x_hat: T,
    pub stderr_mean: T,
    pub stderr_var: T,
    pub n_traj: usize,
    pub seed: u64,
    /// Trajectory-averaged conditional photons per pass.
    pub photons_hat: Vec<T>,
    pub photons_stderr: Vec<T>,
}

impl<T: Real> EnsembleEstimate<T> {
    /// `(z_mean, z_var)` against reference values.
    pub fn z_scores(&self, mean_x: T, var_x: T) -> (T, T) {
        (
            (self.mean_x_hat - mean_x) / self.stderr_mean,
            (self.var_x_hat - var_x) / self.stderr_var,
        )
    }
}

/// Random stream for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
struct Round<T> {
    p_sd: T,
    p_regression: [T; 4],
    x_sd: T,
    x_regression: [T; 2],
}

/// Precomputed conditioning schedule for one parameter point.
#[derive(Clone, Debug)]
pub struct TrajectorySampler<T> {
    start: [T; 2],
    /// Register mean after the beamsplitter is `offset + bs·probe_mean`.
    offset: [T; 6],
    bs: [[T; 2]; 6],
    /// Phase shift followed by probe loss.
    pass: ([[T; 2]; 2], [T; 2]),
    feedback: [T; 2],
    rounds: Vec<Round<T>>,
    /// `Σ_xx + Σ_pp − ½` of the conditional probe at the start of each pass.
    pass_noise: Vec<T>,
    readout_sd: T,
}

fn block2<T: Real>(map: &AffineMap<T>) -> ([[T; 2]; 2], [T; 2]) {
    let a = map.matrix();
    let d = map.displacement();
    ([[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]], [d[0], d[1]])
}

fn cov_noise<T: Real>(state: &GaussianState<T>) -> T {
    let c = state.cov();
    c[(0, 0)] + c[(1, 1)] - lit(0.5)
}

impl<T: Real> TrajectorySampler<T> {
    pub fn new(params: &ProtocolParams<T>) -> Result<Self> {
        params.validate()?;
        let pass_map = AffineMap::rotation(1, 0, params.phi)?.then(&AffineMap::loss(1, 0, params.eta1, T::zero())?)?;
        let resource = lossy_resource(params.r, params.eta2, params.n_th)?;
        let bs = AffineMap::beamsplitter(3, 0, 1)?;
        let start = GaussianState::coherent(params.alpha)?;

        // covariances only: the mean of this reference state is irrelevant
        let mut probe = GaussianState::vacuum(1);
        let mut rounds = Vec::with_capacity(params.m);
        let mut pass_noise = Vec::with_capacity(params.m + 1);
        let zero_probe = GaussianState::vacuum(1).tensor(&resource).apply(&bs)?;
        let offset: [T; 6] = std::array::from_fn(|i| zero_probe.mean()[i]);
        let bs_cols: [[T; 2]; 6] = std::array::from_fn(|i| [bs.matrix()[(i, 0)], bs.matrix()[(i, 1)]]);
        for _ in 0..params.m {
            pass_noise.push(cov_noise(&probe));
            probe = probe.apply(&pass_map)?;
            let register = probe.tensor(&resource).apply(&bs)?;

            let first = register.homodyne_condition(0, Quadrature::P, register.mean()[1])?;
            let second = first
                .state
                .homodyne_condition(0, Quadrature::X, first.state.mean()[0])?;
            rounds.push(Round {
                p_sd: first.marginal_var.sqrt(),
                p_regression: std::array::from_fn(|i| first.regression[i]),
                x_sd: second.marginal_var.sqrt(),
                x_regression: [second.regression[0], second.regression[1]],
            });
            probe = second.state;
        }
        pass_noise.push(cov_noise(&probe));
        let (readout_mean, readout_var) = probe.apply(&pass_map)?.marginal(0, Quadrature::X)?;
        debug_assert!(readout_mean.is_finite());
        if !(readout_var > T::zero()) {
            return Err(Error::DegenerateMeasurement {
                variance: readout_var.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            start: [start.mean()[0], start.mean()[1]],
            offset,
            bs: bs_cols,
            pass: block2(&pass_map),
            feedback: [params.g_x * T::SQRT_2(), params.g_p * T::SQRT_2()],
            rounds,
            pass_noise,
            readout_sd: readout_var.sqrt(),
        })
    }

    pub fn n_passes(&self) -> usize {
        self.pass_noise.len()
    }

    /// Samples one trajectory; `photons` is overwritten with the per-pass ledger.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, photons: &mut Vec<T>) -> T {
        let mut normal = || lit::<T>(rng.sample::<f64, _>(StandardNormal));
        let (a, d) = &self.pass;
        let mut mu = self.start;
        photons.clear();
        for (k, &noise) in self.pass_noise.iter().enumerate() {
            photons.push(mu[0] * mu[0] + mu[1] * mu[1] + noise);
            mu = [
                a[0][0] * mu[0] + a[0][1] * mu[1] + d[0],
                a[1][0] * mu[0] + a[1][1] * mu[1] + d[1],
            ];
            let Some(round) = self.rounds.get(k) else {
                break;
            };
            let v: [T; 6] = std::array::from_fn(|i| self.offset[i] + self.bs[i][0] * mu[0] + self.bs[i][1] * mu[1]);
            let p1 = v[1] + round.p_sd * normal();
            let innovation = p1 - v[1];
            let rest: [T; 4] = std::array::from_fn(|i| v[i + 2] + round.p_regression[i] * innovation);
            let x2 = rest[0] + round.x_sd * normal();
            let innovation = x2 - rest[0];
            mu = [
                rest[2] + round.x_regression[0] * innovation + self.feedback[0] * x2,
                rest[3] + round.x_regression[1] * innovation + self.feedback[1] * p1,
            ];
        }
        mu[0] + self.readout_sd * normal()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrajectoryResult<T> {
        let mut per_pass_photons = Vec::with_capacity(self.n_passes());
        let final_x = self.sample_into(rng, &mut per_pass_photons);
        TrajectoryResult {
            final_x,
            per_pass_photons,
        }
    }
}

/// One trajectory from scratch. Prefer [`TrajectorySampler`] for many draws.
pub fn sample_trajectory<T: Real, R: Rng + ?Sized>(
    params: &ProtocolParams<T>,
    rng: &mut R,
) -> Result<TrajectoryResult<T>> {
    Ok(TrajectorySampler::new(params)?.sample(rng))
}

/// Running count, mean and central moments up to fourth order, mergeable
/// without loss of precision.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments<T> {
    n: T,
    mean: T,
    m2: T,
    m3: T,
    m4: T,
}

impl<T: Real> Moments<T> {
    pub fn push(&mut self, x: T) {
        let n1 = self.n;
        self.n = self.n + T::one();
        let n = self.n;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term = delta * dn * n1;
        self.mean = self.mean + dn;
        self.m4 = self.m4 + term * dn2 * (n * n - lit::<T>(3.0) * n + lit(3.0)) + lit::<T>(6.0) * dn2 * self.m2
            - lit::<T>(4.0) * dn * self.m3;
        self.m3 = self.m3 + term * dn * (n - lit(2.0)) - lit::<T>(3.0) * dn * self.m2;
        self.m2 = self.m2 + term;
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.n == T::zero() {
            return *self;
        }
        if self.n == T::zero() {
            return *other;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let (three, four, six) = (lit::<T>(3.0), lit::<T>(4.0), lit::<T>(6.0));
        Self {
            n,
            mean: self.mean + d * nb / n,
            m2: self.m2 + other.m2 + d2 * na * nb / n,
            m3: self.m3
                + other.m3
                + d2 * d * na * nb * (na - nb) / (n * n)
                + three * d * (na * other.m2 - nb * self.m2) / n,
            m4: self.m4
                + other.m4
                + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
                + six * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
                + four * d * (na * other.m3 - nb * self.m3) / n,
        }
    }

    pub fn count(&self) -> T {
        self.n
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// Unbiased variance.
    pub fn variance(&self) -> T {
        self.m2 / (self.n - T::one())
    }

    pub fn stderr_mean(&self) -> T {
        (self.variance() / self.n).sqrt()
    }

    /// Standard error of [`Self::variance`]: `√((μ₄ − (n−3)/(n−1)·s⁴)/n)`.
    pub fn stderr_variance(&self) -> T {
        let n = self.n;
        let s2 = self.variance();
        let mu4 = self.m4 / n;
        ((mu4 - (n - lit(3.0)) / (n - T::one()) * s2 * s2) / n)
            .max(T::zero())
            .sqrt()
    }
}

#[derive(Clone, Debug)]
struct Tally<T> {
    x: Moments<T>,
    photons: Vec<Moments<T>>,
}

impl<T: Real> Tally<T> {
    fn new(passes: usize) -> Self {
        Self {
            x: Moments::default(),
            photons: vec![Moments::default(); passes],
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.x = self.x.merge(&other.x);
        for (a, b) in self.photons.iter_mut().zip(&other.photons) {
            *a = a.merge(b);
        }
        self
    }
}

/// Sample mean and variance of the final readout over `n_traj` trajectories.
///
/// Runs on the current rayon pool; the result is identical for any pool size.
pub fn estimate<T: Real>(params: &ProtocolParams<T>, n_traj: usize, seed: u64) -> Result<EnsembleEstimate<T>> {
    if n_traj < 2 {
        return Err(Error::invalid("n_traj", "must be at least 2"));
    }
    let sampler = TrajectorySampler::new(params)?;
    let passes = sampler.n_passes();
    let n_chunks = n_traj.div_ceil(CHUNK);
    let tallies: Vec<Tally<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::new(passes);
            let mut photons = Vec::with_capacity(passes);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                let mut rng = trajectory_rng(seed, i as u64);
                let x = sampler.sample_into(&mut rng, &mut photons);
                tally.x.push(x);
                for (acc, &n) in tally.photons.iter_mut().zip(&photons) {
                    acc.push(n);
                }
            }
            tally
        })
        .collect();
    let total = tallies.iter().fold(Tally::new(passes), |acc, t| acc.merge(t));
    debug_assert_eq!(total.x.count(), from_usize::<T>(n_traj));
    Ok(EnsembleEstimate {
        mean_x_hat: total.x.mean(),
        var_x_hat: total.x.variance(),
        stderr_mean: total.x.stderr_mean(),
        stderr_var: total.x.stderr_variance(),
        n_traj,
        seed,
        photons_hat: total.photons.iter().map(Moments::mean).collect(),
        photons_stderr: total.photons.iter().map(Moments::stderr_mean).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_workers;
    use crate::protocol::{propagate, run_ensemble};
    use proptest::prelude::*;

    fn within(estimate: f64, se: f64, target: f64, k: f64) -> bool {
        (estimate - target).abs() < k * se
    }

    /// Same random draws, but every step done on the full multimode state.
    fn reference_trajectory(params: &ProtocolParams<f64>, rng: &mut ChaCha8Rng) -> TrajectoryResult<f64> {
        let mut normal = || -> f64 { rand::Rng::sample(rng, StandardNormal) };
        let resource = lossy_resource(params.r, params.eta2, params.n_th).unwrap();
        let mut probe = GaussianState::coherent(params.alpha).unwrap();
        let mut photons = Vec::new();
        for pass in 0..=params.m {
            photons.push(probe.mean_photons(0).unwrap());
            probe = probe
                .phase_rotate(0, params.phi)
                .unwrap()
                .loss_channel(0, params.eta1, 0.0)
                .unwrap();
            if pass == params.m {
                break;
            }
            let register = probe.tensor(&resource).balanced_bs(0, 1).unwrap();
            let (mp, vp) = register.marginal(0, Quadrature::P).unwrap();
            let p1 = mp + vp.sqrt() * normal();
            let after_p = register.homodyne_condition(0, Quadrature::P, p1).unwrap().state;
            let (mx, vx) = after_p.marginal(0, Quadrature::X).unwrap();
            let x2 = mx + vx.sqrt() * normal();
            let receiver = after_p.homodyne_condition(0, Quadrature::X, x2).unwrap().state;
            let root2 = std::f64::consts::SQRT_2;
            probe = receiver
                .displace(0, params.g_x * root2 * x2, params.g_p * root2 * p1)
                .unwrap();
        }
        let (m, v) = probe.marginal(0, Quadrature::X).unwrap();
        TrajectoryResult {
            final_x: m + v.sqrt() * normal(),
            per_pass_photons: photons,
        }
    }

    #[test]
    fn schedule_matches_full_state_trajectory() {
        let params = ProtocolParams::new(1.3f64, 0.4, 0.8, 4)
            .with_gains(0.7, 1.3)
            .with_losses(0.85, 0.9)
            .with_thermal(0.05);
        let sampler = TrajectorySampler::new(&params).unwrap();
        for i in 0..20 {
            let fast = sampler.sample(&mut trajectory_rng(3, i));
            let slow = reference_trajectory(&params, &mut trajectory_rng(3, i));
            assert!((fast.final_x - slow.final_x).abs() < 1e-12, "{fast:?} vs {slow:?}");
            for (a, b) in fast.per_pass_photons.iter().zip(&slow.per_pass_photons) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_teleportation_is_direct_coherent_homodyne() {
        let params = ProtocolParams::new(1.5f64, 0.3, 1.0, 0);
        let est = estimate(&params, 200_000, 11).unwrap();
        assert!(
            within(est.mean_x_hat, est.stderr_mean, 1.5 * 0.3f64.sin(), 4.0),
            "{est:?}"
        );
        assert!(within(est.var_x_hat, est.stderr_var, 0.25, 4.0), "{est:?}");
        // fourth moment of a Gaussian: stderr of the variance ≈ s²√(2/n)
        assert!((est.stderr_var / (0.25 * (2.0 / 200_000f64).sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn unit_gain_point_matches_closed_form() {
        let params = ProtocolParams::new(1.0f64, 0.1, 1.0, 2);
        let est = estimate(&params, 200_000, 2024).unwrap();
        assert!(within(est.mean_x_hat, est.stderr_mean, 0.3f64.sin(), 4.0), "{est:?}");
        let var = (1.0 + 4.0 * (-2.0f64).exp()) / 4.0;
        assert!((var - 0.385335).abs() < 1e-6);
        assert!(within(est.var_x_hat, est.stderr_var, var, 4.0), "{est:?}");
    }

    #[test]
    fn large_squeezing_recovers_ideal_signal() {
        let params = ProtocolParams::new(1.0f64, 0.3, 15.0, 2);
        let est = estimate(&params, 100_000, 5).unwrap();
        assert!(within(est.mean_x_hat, est.stderr_mean, 0.9f64.sin(), 4.0), "{est:?}");
    }

    #[test]
    fn anisotropic_lossy_point_and_photon_ledger_match_ensemble() {
        let params = ProtocolParams::new(1.2f64, 0.25, 1.2, 3)
            .with_gains(0.7, 1.3)
            .with_losses(0.9, 0.95)
            .with_thermal(0.02);
        let est = estimate(&params, 200_000, 77).unwrap();
        let ens = run_ensemble(&params).unwrap();
        let (zm, zv) = est.z_scores(ens.mean_x, ens.var_x);
        assert!(zm.abs() < 4.0 && zv.abs() < 4.0, "z = ({zm}, {zv})");
        let ledger = propagate(&params).unwrap().per_pass_photons;
        for ((hat, se), exact) in est.photons_hat.iter().zip(&est.photons_stderr).zip(&ledger) {
            if *se == 0.0 {
                assert!((hat - exact).abs() < 1e-12);
            } else {
                assert!(within(*hat, *se, *exact, 4.0), "{hat} ± {se} vs {exact}");
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible_across_worker_counts() {
        let params = ProtocolParams::new(0.8f64, 0.2, 0.7, 3).with_gains(0.9, 1.1);
        let one = with_workers(Some(1), || estimate(&params, 5_000, 99)).unwrap().unwrap();
        let three = with_workers(Some(3), || estimate(&params, 5_000, 99)).unwrap().unwrap();
        assert_eq!(one, three);
        let a = sample_trajectory(&params, &mut trajectory_rng(1, 42)).unwrap();
        let b = sample_trajectory(&params, &mut trajectory_rng(1, 42)).unwrap();
        assert_eq!(a, b);
        assert_ne!(estimate(&params, 5_000, 100).unwrap(), one);
    }

    #[test]
    fn two_trajectories_give_positive_errors() {
        let est = estimate(&ProtocolParams::new(1.0f64, 0.1, 1.0, 2), 2, 0).unwrap();
        assert!(est.stderr_mean.is_finite() && est.stderr_mean > 0.0);
        assert!(est.stderr_var.is_finite() && est.stderr_var > 0.0);
        assert!(estimate(&ProtocolParams::new(1.0f64, 0.1, 1.0, 2), 1, 0).is_err());
    }

    #[test]
    fn single_precision_runs() {
        let est = estimate(&ProtocolParams::new(1.0f32, 0.1, 1.0, 2), 20_000, 4).unwrap();
        assert!((est.mean_x_hat - 0.3f32.sin()).abs() < 4.0 * est.stderr_mean);
    }

    proptest! {
        #[test]
        fn merged_moments_equal_sequential(xs in prop::collection::vec(-5.0f64..5.0, 2..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let mut all = Moments::default();
            xs.iter().for_each(|&x| all.push(x));
            let (mut a, mut b) = (Moments::default(), Moments::default());
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            let merged = a.merge(&b);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let m4: f64 = xs.iter().map(|x| (x - mean).powi(4)).sum();
            prop_assert!((merged.mean() - mean).abs() < 1e-12);
            prop_assert!((merged.variance() - all.variance()).abs() < 1e-10);
            prop_assert!((merged.m4 - m4).abs() < 1e-8 * m4.max(1.0));
            prop_assert!((all.m4 - m4).abs() < 1e-8 * m4.max(1.0));
        }
    }
}
