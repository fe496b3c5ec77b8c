//! First and second moments of multimode Gaussian states.
//!
//! Quadratures are ordered `(x₁, p₁, x₂, p₂, …)` and normalized as
//! `x = (a + a†)/2`, `p = (a − a†)/(2i)`, so the vacuum has `cov = I/4` and
//! the mean photon number is `⟨x²⟩ + ⟨p²⟩ − 1/2`. Every Gaussian operation is
//! an [`AffineMap`] acting as `mean → A·mean + d`, `cov → A·cov·Aᵀ + N`;
//! homodyne conditioning is the only non-affine update.

use crate::error::{ensure_finite, ensure_non_negative, ensure_unit_interval, Error, Result};
use crate::linalg::Matrix;
use crate::real::{lit, Real};

/// Variance of either vacuum quadrature.
pub fn vacuum_variance<T: Real>() -> T {
    lit(0.25)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
}

/// Result of a homodyne measurement on one mode.
#[derive(Clone, Debug)]
pub struct HomodyneOutcome<T> {
    /// Remaining modes, conditioned on the outcome.
    pub state: GaussianState<T>,
    pub marginal_mean: T,
    pub marginal_var: T,
    /// `Σ_{rest,k} / Σ_kk`: how the remaining means move per unit of innovation.
    pub regression: Vec<T>,
}

impl<T: Real> GaussianState<T> {
    /// Builds a state after checking symmetry, finiteness and the uncertainty principle.
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if mean.is_empty() || !mean.len().is_multiple_of(2) {
            return Err(Error::invalid("mean", "length must be a positive even number"));
        }
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(Error::invalid("cov", "shape must be 2n×2n matching the mean"));
        }
        let state = Self { mean, cov };
        state.check_invariants()?;
        Ok(state)
    }

    pub(crate) fn from_parts(mean: Vec<T>, cov: Matrix<T>) -> Self {
        debug_assert_eq!(mean.len(), cov.rows());
        Self { mean, cov }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        assert!(n_modes > 0, "a state needs at least one mode");
        Self {
            mean: vec![T::zero(); 2 * n_modes],
            cov: Matrix::identity(2 * n_modes).scale(vacuum_variance()),
        }
    }

    /// Coherent probe with `⟨x̂⟩ = 0`, `⟨p̂⟩ = alpha`.
    pub fn coherent(alpha: T) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        let mut s = Self::vacuum(1);
        s.mean[1] = alpha;
        Ok(s)
    }

    /// Single-mode squeezed vacuum with `Var(x) = e^{−2r}/4`, `Var(p) = e^{2r}/4`.
    /// Negative `r` squeezes `p` instead.
    pub fn squeezed_vacuum(r: T) -> Result<Self> {
        ensure_finite("r", r)?;
        let two_r = r + r;
        let q = vacuum_variance::<T>();
        Ok(Self {
            mean: vec![T::zero(); 2],
            cov: Matrix::from_diagonal(&[q * (-two_r).exp(), q * two_r.exp()]),
        })
    }

    /// Two-mode squeezed vacuum with `x` correlated and `p` anticorrelated, so that
    /// `Var(x₁ − x₂) = Var(p₁ + p₂) = e^{−2r}/2`.
    pub fn tmsv(r: T) -> Result<Self> {
        ensure_non_negative("r", r)?;
        let two_r = r + r;
        let q = vacuum_variance::<T>();
        let c = q * two_r.cosh();
        let s = q * two_r.sinh();
        let z = T::zero();
        let cov = Matrix::from_rows(&[vec![c, z, s, z], vec![z, c, z, -s], vec![s, z, c, z], vec![z, -s, z, c]]);
        Ok(Self {
            mean: vec![T::zero(); 4],
            cov,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                index: mode,
                n_modes: self.n_modes(),
            })
        }
    }

    /// Product state `self ⊗ other`; `other`'s modes are appended.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut mean = self.mean.clone();
        mean.extend_from_slice(&other.mean);
        Self {
            mean,
            cov: self.cov.direct_sum(&other.cov),
        }
    }

    pub fn apply(&self, map: &AffineMap<T>) -> Result<Self> {
        if map.matrix.cols() != self.mean.len() {
            return Err(Error::invalid(
                "map",
                format!(
                    "expects {} input quadratures, state has {}",
                    map.matrix.cols(),
                    self.mean.len()
                ),
            ));
        }
        let mut mean = map.matrix.mul_vec(&self.mean);
        for (m, &d) in mean.iter_mut().zip(&map.displacement) {
            *m = *m + d;
        }
        let mut cov = &map.matrix.congruence(&self.cov) + &map.noise;
        cov.symmetrize();
        Ok(Self { mean, cov })
    }

    pub fn phase_rotate(&self, mode: usize, phi: T) -> Result<Self> {
        self.check_mode(mode)?;
        ensure_finite("phi", phi)?;
        self.apply(&AffineMap::rotation(self.n_modes(), mode, phi)?)
    }

    pub fn balanced_bs(&self, i: usize, j: usize) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        self.apply(&AffineMap::beamsplitter(self.n_modes(), i, j)?)
    }

    pub fn loss_channel(&self, mode: usize, eta: T, n_th: T) -> Result<Self> {
        self.check_mode(mode)?;
        self.apply(&AffineMap::loss(self.n_modes(), mode, eta, n_th)?)
    }

    pub fn displace(&self, mode: usize, dx: T, dp: T) -> Result<Self> {
        self.check_mode(mode)?;
        ensure_finite("dx", dx)?;
        ensure_finite("dp", dp)?;
        let mut out = self.clone();
        out.mean[2 * mode] = out.mean[2 * mode] + dx;
        out.mean[2 * mode + 1] = out.mean[2 * mode + 1] + dp;
        Ok(out)
    }

    pub fn mean_photons(&self, mode: usize) -> Result<T> {
        self.check_mode(mode)?;
        let (ix, ip) = (2 * mode, 2 * mode + 1);
        let n = self.mean[ix] * self.mean[ix] + self.mean[ip] * self.mean[ip] + self.cov[(ix, ix)] + self.cov[(ip, ip)]
            - lit(0.5);
        Ok(n.max(T::zero()))
    }

    /// Mean and variance of one quadrature's homodyne statistics.
    pub fn marginal(&self, mode: usize, quadrature: Quadrature) -> Result<(T, T)> {
        self.check_mode(mode)?;
        let k = 2 * mode + quadrature.offset();
        Ok((self.mean[k], self.cov[(k, k)]))
    }

    /// Partial trace keeping `modes` in the given order.
    pub fn reduce(&self, modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("modes", "must keep at least one mode"));
        }
        let mut idx = Vec::with_capacity(2 * modes.len());
        for &m in modes {
            self.check_mode(m)?;
            idx.push(2 * m);
            idx.push(2 * m + 1);
        }
        Ok(Self {
            mean: idx.iter().map(|&i| self.mean[i]).collect(),
            cov: self.cov.select(&idx, &idx),
        })
    }

    /// Measures one quadrature of `mode` with result `outcome` and traces the mode out.
    pub fn homodyne_condition(&self, mode: usize, quadrature: Quadrature, outcome: T) -> Result<HomodyneOutcome<T>> {
        self.check_mode(mode)?;
        ensure_finite("outcome", outcome)?;
        if self.n_modes() < 2 {
            return Err(Error::invalid(
                "mode",
                "conditioning needs at least one unmeasured mode; use marginal() for readout",
            ));
        }
        let k = 2 * mode + quadrature.offset();
        let var = self.cov[(k, k)];
        if !(var > T::zero()) {
            return Err(Error::DegenerateMeasurement {
                variance: var.to_f64().unwrap_or(f64::NAN),
            });
        }
        let rest: Vec<usize> = (0..self.mean.len()).filter(|&i| i / 2 != mode).collect();
        let regression: Vec<T> = rest.iter().map(|&i| self.cov[(i, k)] / var).collect();
        let innovation = outcome - self.mean[k];
        let mean = rest
            .iter()
            .zip(&regression)
            .map(|(&i, &g)| self.mean[i] + g * innovation)
            .collect();
        let mut cov = self.cov.select(&rest, &rest);
        for (a, &i) in rest.iter().enumerate() {
            for (b, _) in rest.iter().enumerate() {
                cov[(a, b)] = cov[(a, b)] - self.cov[(i, k)] * regression[b];
            }
        }
        cov.symmetrize();
        Ok(HomodyneOutcome {
            state: Self { mean, cov },
            marginal_mean: self.mean[k],
            marginal_var: var,
            regression,
        })
    }

    /// Symplectic eigenvalues in ascending order, one per mode.
    ///
    /// Computed as square roots of the spectrum of `√σ Ωᵀ σ Ω √σ`, which is
    /// similar to `−(Ωσ)²` and has every `ν²` twice.
    pub fn symplectic_eigenvalues(&self) -> Vec<T> {
        let n = self.n_modes();
        let omega = Matrix::<T>::symplectic_form(n);
        let root = self.cov.sqrt_psd();
        let inner = omega.transpose().congruence(&self.cov);
        let (values, _) = root.congruence(&inner).symmetric_eigen();
        values
            .chunks(2)
            .map(|pair| (pair.iter().copied().sum::<T>() / lit(2.0)).max(T::zero()).sqrt())
            .collect()
    }

    /// Checks symmetry, finiteness and `ν ≥ 1/4` for every symplectic eigenvalue.
    pub fn check_invariants(&self) -> Result<()> {
        let tol = T::structural_tolerance();
        if !self.mean.iter().all(|v| v.is_finite()) || !self.cov.all_finite() {
            return Err(Error::Unphysical("non-finite moments".into()));
        }
        if !self.cov.is_symmetric(tol) {
            return Err(Error::Unphysical("covariance not symmetric".into()));
        }
        let (values, _) = self.cov.symmetric_eigen();
        if values[0] < -tol {
            return Err(Error::Unphysical(format!(
                "covariance has negative eigenvalue {}",
                values[0]
            )));
        }
        let nu_min = self.symplectic_eigenvalues()[0];
        if nu_min < vacuum_variance::<T>() - tol {
            return Err(Error::Unphysical(format!(
                "symplectic eigenvalue {nu_min} below vacuum level 1/4"
            )));
        }
        Ok(())
    }
}

/// Affine Gaussian map `mean → A·mean + d`, `cov → A·cov·Aᵀ + N`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap<T> {
    matrix: Matrix<T>,
    displacement: Vec<T>,
    noise: Matrix<T>,
}

impl<T: Real> AffineMap<T> {
    pub fn new(matrix: Matrix<T>, displacement: Vec<T>, noise: Matrix<T>) -> Result<Self> {
        let n_out = matrix.rows();
        if n_out == 0 || !n_out.is_multiple_of(2) || !matrix.cols().is_multiple_of(2) {
            return Err(Error::invalid("matrix", "dimensions must be even and non-zero"));
        }
        if displacement.len() != n_out || noise.rows() != n_out || noise.cols() != n_out {
            return Err(Error::invalid("noise", "dimensions must match the output register"));
        }
        let tol = T::structural_tolerance();
        if !noise.is_symmetric(tol) {
            return Err(Error::invalid("noise", "must be symmetric"));
        }
        let (values, _) = noise.symmetric_eigen();
        if values[0] < -tol {
            return Err(Error::invalid("noise", "must be positive semidefinite"));
        }
        Ok(Self {
            matrix,
            displacement,
            noise,
        })
    }

    fn linear(matrix: Matrix<T>) -> Self {
        let n = matrix.rows();
        Self {
            matrix,
            displacement: vec![T::zero(); n],
            noise: Matrix::zeros(n, n),
        }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self::linear(Matrix::identity(2 * n_modes))
    }

    /// Phase shift `e^{iφn̂}` on `mode`: `x → x cosφ + p sinφ`, `p → p cosφ − x sinφ`.
    pub fn rotation(n_modes: usize, mode: usize, phi: T) -> Result<Self> {
        check_index(mode, n_modes)?;
        let (s, c) = phi.sin_cos();
        let mut a = Matrix::identity(2 * n_modes);
        let (ix, ip) = (2 * mode, 2 * mode + 1);
        a[(ix, ix)] = c;
        a[(ix, ip)] = s;
        a[(ip, ix)] = -s;
        a[(ip, ip)] = c;
        Ok(Self::linear(a))
    }

    /// Balanced beamsplitter: `q_i → (q_i + q_j)/√2`, `q_j → (q_i − q_j)/√2` for both quadratures.
    pub fn beamsplitter(n_modes: usize, i: usize, j: usize) -> Result<Self> {
        check_index(i, n_modes)?;
        check_index(j, n_modes)?;
        if i == j {
            return Err(Error::invalid("mode", "beamsplitter needs two distinct modes"));
        }
        let h = T::FRAC_1_SQRT_2();
        let mut a = Matrix::identity(2 * n_modes);
        for q in 0..2 {
            let (qi, qj) = (2 * i + q, 2 * j + q);
            a[(qi, qi)] = h;
            a[(qi, qj)] = h;
            a[(qj, qi)] = h;
            a[(qj, qj)] = -h;
        }
        Ok(Self::linear(a))
    }

    /// Beamsplitter of transmissivity `eta` against a thermal mode with `n_th` photons,
    /// the second output traced out.
    pub fn loss(n_modes: usize, mode: usize, eta: T, n_th: T) -> Result<Self> {
        check_index(mode, n_modes)?;
        ensure_unit_interval("eta", eta)?;
        ensure_non_negative("n_th", n_th)?;
        let t = eta.sqrt();
        let added = (T::one() - eta) * (T::one() + n_th + n_th) * vacuum_variance::<T>();
        let mut a = Matrix::identity(2 * n_modes);
        let mut noise = Matrix::zeros(2 * n_modes, 2 * n_modes);
        for q in [2 * mode, 2 * mode + 1] {
            a[(q, q)] = t;
            noise[(q, q)] = added;
        }
        Ok(Self {
            matrix: a,
            displacement: vec![T::zero(); 2 * n_modes],
            noise,
        })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn displacement(&self) -> &[T] {
        &self.displacement
    }

    pub fn noise(&self) -> &Matrix<T> {
        &self.noise
    }

    pub fn n_in_modes(&self) -> usize {
        self.matrix.cols() / 2
    }

    pub fn n_out_modes(&self) -> usize {
        self.matrix.rows() / 2
    }

    /// `next ∘ self`: `(A₂A₁, A₂d₁ + d₂, A₂N₁A₂ᵀ + N₂)`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if next.matrix.cols() != self.matrix.rows() {
            return Err(Error::invalid("map", "composition dimension mismatch"));
        }
        let mut displacement = next.matrix.mul_vec(&self.displacement);
        for (d, &e) in displacement.iter_mut().zip(&next.displacement) {
            *d = *d + e;
        }
        let mut noise = &next.matrix.congruence(&self.noise) + &next.noise;
        noise.symmetrize();
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
            displacement,
            noise,
        })
    }

    /// `A·v` without the displacement, for pushing mean derivatives through.
    pub fn apply_linear(&self, v: &[T]) -> Vec<T> {
        self.matrix.mul_vec(v)
    }

    /// `A Ω_in Aᵀ` compared against `Ω_out` to the structural tolerance.
    pub fn preserves_commutators(&self) -> bool {
        let lhs = self.matrix.congruence(&Matrix::symplectic_form(self.n_in_modes()));
        let rhs = Matrix::symplectic_form(self.n_out_modes());
        (&lhs - &rhs).max_abs() <= T::structural_tolerance()
    }
}

fn check_index(index: usize, n_modes: usize) -> Result<()> {
    if index < n_modes {
        Ok(())
    } else {
        Err(Error::ModeOutOfRange { index, n_modes })
    }
}
