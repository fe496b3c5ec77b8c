//! The repeated-teleportation phase probe.
//!
//! A coherent probe passes the phase shift `m + 1` times. Between passes it is
//! teleported back onto the receiver half of a fresh two-mode squeezed vacuum:
//! probe and sender half meet on a balanced beamsplitter, `p̂′₁` and `x̂′₂` are
//! homodyned, and the receiver is displaced by `(g_x√2·x′₂, g_p√2·p′₁)`.
//! Averaged over outcomes this is the affine reduction
//! `x_out = x₃ + g_x(x₁ − x₂)`, `p_out = p₃ + g_p(p₁ + p₂)`.
//!
//! The register order inside a round is probe, sender half, receiver half.

use crate::error::{ensure_finite, ensure_non_negative, ensure_unit_interval, Error, Result};
use crate::gaussian::{AffineMap, GaussianState};
use crate::linalg::Matrix;
use crate::real::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolParams<T> {
    /// Initial coherent amplitude, `⟨p̂⟩ = alpha`.
    pub alpha: T,
    /// Phase per pass, radians.
    pub phi: T,
    /// Two-mode squeezing parameter of each resource pair.
    pub r: T,
    /// Number of teleportations; the phase is applied `m + 1` times.
    pub m: usize,
    pub g_x: T,
    pub g_p: T,
    /// Transmission after each phase pass.
    pub eta1: T,
    /// Transmission applied to both resource modes at generation.
    pub eta2: T,
    /// Thermal photons admixed at the resource loss.
    pub n_th: T,
}

impl<T: Real> ProtocolParams<T> {
    /// Unit gains, no loss, no excess noise.
    pub fn new(alpha: T, phi: T, r: T, m: usize) -> Self {
        Self {
            alpha,
            phi,
            r,
            m,
            g_x: T::one(),
            g_p: T::one(),
            eta1: T::one(),
            eta2: T::one(),
            n_th: T::zero(),
        }
    }

    pub fn with_gains(mut self, g_x: T, g_p: T) -> Self {
        self.g_x = g_x;
        self.g_p = g_p;
        self
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

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_phi(mut self, phi: T) -> Self {
        self.phi = phi;
        self
    }

    pub fn has_unit_gains(&self) -> bool {
        self.g_x == T::one() && self.g_p == T::one()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("alpha", self.alpha)?;
        ensure_finite("phi", self.phi)?;
        ensure_non_negative("r", self.r)?;
        for (name, g) in [("g_x", self.g_x), ("g_p", self.g_p)] {
            ensure_finite(name, g)?;
            if !(g > T::zero()) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        ensure_unit_interval("eta1", self.eta1)?;
        ensure_unit_interval("eta2", self.eta2)?;
        ensure_non_negative("n_th", self.n_th)?;
        Ok(())
    }
}

/// Final probe moments and the photon ledger of one protocol run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolMoments<T> {
    pub mean_x: T,
    pub mean_p: T,
    pub var_x: T,
    pub var_p: T,
    /// Exact `d⟨x̂⟩/dφ` at the readout.
    pub dmeanx_dphi: T,
    /// `⟨n̂⟩` of the probe entering each of the `m + 1` phase passes.
    pub per_pass_photons: Vec<T>,
    pub n_total: T,
    pub sigma: T,
}

/// Everything [`propagate`] tracks, before a sensitivity is formed.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation<T> {
    pub state: GaussianState<T>,
    /// `d(mean)/dφ` for the final probe, `(x, p)`.
    pub dmean: [T; 2],
    pub per_pass_photons: Vec<T>,
    pub n_total: T,
}

/// Three-mode to one-mode map: beamsplitter on probe and sender, then the
/// feedback readout `(x₃ + g_x√2·x′₂, p₃ + g_p√2·p′₁)` of the receiver.
pub fn teleportation_reduction<T: Real>(g_x: T, g_p: T) -> Result<AffineMap<T>> {
    let bs = AffineMap::beamsplitter(3, 0, 1)?;
    let root2 = T::SQRT_2();
    let z = T::zero();
    let o = T::one();
    let feedback = Matrix::from_rows(&[vec![z, z, g_x * root2, z, o, z], vec![z, g_p * root2, z, z, z, o]]);
    let readout = AffineMap::new(feedback, vec![z; 2], Matrix::zeros(2, 2))?;
    bs.then(&readout)
}

/// Two-mode squeezed vacuum after loss `eta2` (with `n_th` thermal photons) on each mode.
pub fn lossy_resource<T: Real>(r: T, eta2: T, n_th: T) -> Result<GaussianState<T>> {
    GaussianState::tmsv(r)?
        .loss_channel(0, eta2, n_th)?
        .loss_channel(1, eta2, n_th)
}

/// One teleportation round applied to a single-mode probe and its mean derivative.
pub fn teleport_step<T: Real>(
    probe: &GaussianState<T>,
    dmean: [T; 2],
    params: &ProtocolParams<T>,
) -> Result<(GaussianState<T>, [T; 2])> {
    if probe.n_modes() != 1 {
        return Err(Error::invalid("probe", "must be a single mode"));
    }
    params.validate()?;
    let register = probe.tensor(&lossy_resource(params.r, params.eta2, params.n_th)?);
    let reduction = teleportation_reduction(params.g_x, params.g_p)?;
    let out = register.apply(&reduction)?;
    let d = reduction.apply_linear(&[dmean[0], dmean[1], T::zero(), T::zero(), T::zero(), T::zero()]);
    Ok((out, [d[0], d[1]]))
}

/// Teleportation round as a single-mode channel: the resource is marginalized
/// into the added-noise term of the reduction.
pub fn teleport_channel<T: Real>(params: &ProtocolParams<T>) -> Result<AffineMap<T>> {
    params.validate()?;
    let resource = lossy_resource(params.r, params.eta2, params.n_th)?;
    let reduction = teleportation_reduction(params.g_x, params.g_p)?;
    let a = reduction.matrix();
    let probe_cols = a.select(&[0, 1], &[0, 1]);
    let resource_cols = a.select(&[0, 1], &[2, 3, 4, 5]);
    let shift = resource_cols.mul_vec(resource.mean());
    let mut noise = resource_cols.congruence(resource.cov());
    noise.symmetrize();
    AffineMap::new(probe_cols, shift, noise)
}

/// Fixed-size single-mode affine map for the hot propagation loop.
#[derive(Clone, Copy)]
struct ModeMap<T> {
    a: [[T; 2]; 2],
    d: [T; 2],
    n: [[T; 2]; 2],
}

impl<T: Real> ModeMap<T> {
    fn from_map(map: &AffineMap<T>) -> Self {
        debug_assert_eq!((map.n_in_modes(), map.n_out_modes()), (1, 1));
        let m = map.matrix();
        let n = map.noise();
        Self {
            a: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
            d: [map.displacement()[0], map.displacement()[1]],
            n: [[n[(0, 0)], n[(0, 1)]], [n[(1, 0)], n[(1, 1)]]],
        }
    }
}

#[derive(Clone, Copy)]
struct Mode<T> {
    mean: [T; 2],
    cov: [[T; 2]; 2],
    dmean: [T; 2],
}

fn mat_vec<T: Real>(a: &[[T; 2]; 2], v: [T; 2]) -> [T; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

impl<T: Real> Mode<T> {
    fn apply(&mut self, map: &ModeMap<T>) {
        let mv = mat_vec(&map.a, self.mean);
        self.mean = [mv[0] + map.d[0], mv[1] + map.d[1]];
        self.dmean = mat_vec(&map.a, self.dmean);
        let a = &map.a;
        let c = &self.cov;
        let mut out = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = map.n[i][j];
                for k in 0..2 {
                    for l in 0..2 {
                        acc = acc + a[i][k] * c[k][l] * a[j][l];
                    }
                }
                out[i][j] = acc;
            }
        }
        let off = (out[0][1] + out[1][0]) / lit(2.0);
        out[0][1] = off;
        out[1][0] = off;
        self.cov = out;
    }

    fn photons(&self) -> T {
        let n = self.mean[0] * self.mean[0] + self.mean[1] * self.mean[1] + self.cov[0][0] + self.cov[1][1] - lit(0.5);
        n.max(T::zero())
    }
}

/// Runs the full pipeline: for each of the `m + 1` passes, record the probe
/// photons, apply the phase shift and the probe loss; between passes,
/// teleport. The mean derivative is co-propagated exactly.
pub fn propagate<T: Real>(params: &ProtocolParams<T>) -> Result<Propagation<T>> {
    params.validate()?;
    let rotation = ModeMap::from_map(&AffineMap::rotation(1, 0, params.phi)?);
    // dR/dφ for x → x cosφ + p sinφ, p → p cosφ − x sinφ
    let (s, c) = params.phi.sin_cos();
    let rotation_rate = [[-s, c], [-c, -s]];
    let loss = ModeMap::from_map(&AffineMap::loss(1, 0, params.eta1, T::zero())?);
    let channel = ModeMap::from_map(&teleport_channel(params)?);

    let start = GaussianState::coherent(params.alpha)?;
    let q = start.cov();
    let mut probe = Mode {
        mean: [start.mean()[0], start.mean()[1]],
        cov: [[q[(0, 0)], q[(0, 1)]], [q[(1, 0)], q[(1, 1)]]],
        dmean: [T::zero(); 2],
    };
    let mut ledger = Vec::with_capacity(params.m + 1);
    for pass in 0..=params.m {
        ledger.push(probe.photons());
        let source = mat_vec(&rotation_rate, probe.mean);
        probe.apply(&rotation);
        probe.dmean = [probe.dmean[0] + source[0], probe.dmean[1] + source[1]];
        probe.apply(&loss);
        if pass < params.m {
            probe.apply(&channel);
        }
    }
    let n_total = ledger.iter().fold(T::zero(), |acc, &n| acc + n);
    let cov = Matrix::from_rows(&[probe.cov[0].to_vec(), probe.cov[1].to_vec()]);
    Ok(Propagation {
        state: GaussianState::from_parts(probe.mean.to_vec(), cov),
        dmean: probe.dmean,
        per_pass_photons: ledger,
        n_total,
    })
}

/// Ensemble-averaged final moments and sensitivity `σ = √Var(x̂)/|d⟨x̂⟩/dφ|`.
pub fn run_ensemble<T: Real>(params: &ProtocolParams<T>) -> Result<ProtocolMoments<T>> {
    let prop = propagate(params)?;
    let slope = prop.dmean[0];
    if slope == T::zero() || !slope.is_finite() {
        return Err(Error::SensitivityUndefined);
    }
    let mean = prop.state.mean();
    let cov = prop.state.cov();
    let var_x = cov[(0, 0)];
    Ok(ProtocolMoments {
        mean_x: mean[0],
        mean_p: mean[1],
        var_x,
        var_p: cov[(1, 1)],
        dmeanx_dphi: slope,
        sigma: var_x.sqrt() / slope.abs(),
        per_pass_photons: prop.per_pass_photons,
        n_total: prop.n_total,
    })
}

/// `(A, B)` with `n_total(α) = A·α² + B` for the given gains, losses and squeezing.
/// `params.alpha` is ignored.
pub fn photon_budget_coefficients<T: Real>(params: &ProtocolParams<T>) -> Result<(T, T)> {
    let floor = propagate(&params.with_alpha(T::zero()))?.n_total;
    let unit = propagate(&params.with_alpha(T::one()))?.n_total;
    Ok((unit - floor, floor))
}
