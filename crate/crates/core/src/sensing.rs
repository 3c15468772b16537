//! Common-support signal ensembles, random orthoprojector measurement
//! matrices, noisy per-node observations and the MAC-aggregated observation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};

/// `L` sparse vectors of length `N` sharing one support of size `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSparseEnsemble {
    pub n: usize,
    pub k: usize,
    /// Ascending support indices.
    pub support: Vec<usize>,
    pub signals: Vec<DVector<f64>>,
    /// 1 at support indices, 0 elsewhere.
    pub indicator: Vec<u8>,
}

impl JointSparseEnsemble {
    /// Wraps explicit signals, checking that they share an identical support.
    pub fn from_signals(signals: Vec<DVector<f64>>) -> Result<Self> {
        let first = signals
            .first()
            .ok_or_else(|| invalid("ensemble needs at least one signal"))?;
        let n = first.len();
        let support: Vec<usize> = (0..n).filter(|&i| first[i] != 0.0).collect();
        if support.is_empty() {
            return Err(invalid("signals have empty support"));
        }
        for (l, s) in signals.iter().enumerate() {
            if s.len() != n {
                return Err(invalid(format!("signal {l} has length {} != {n}", s.len())));
            }
            let own: Vec<usize> = (0..n).filter(|&i| s[i] != 0.0).collect();
            if own != support {
                return Err(invalid(format!("signal {l} does not share the common support")));
            }
        }
        Ok(Self::assemble(n, support, signals))
    }

    fn assemble(n: usize, support: Vec<usize>, signals: Vec<DVector<f64>>) -> Self {
        let mut indicator = vec![0u8; n];
        for &i in &support {
            indicator[i] = 1;
        }
        Self {
            n,
            k: support.len(),
            support,
            signals,
            indicator,
        }
    }

    pub fn l_count(&self) -> usize {
        self.signals.len()
    }
}

/// Per-node measurement matrices `B_l = A_l Φ` and the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    pub m: usize,
    pub n: usize,
    pub matrices: Vec<DMatrix<f64>>,
    pub basis_is_identity: bool,
    pub shared_matrix: bool,
    pub noise_sigma2: f64,
}

impl MeasurementEnsemble {
    /// Draws `l_count` random orthoprojectors (a single one repeated when `shared`).
    pub fn orthoprojectors<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        l_count: usize,
        shared: bool,
        noise_sigma2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if l_count == 0 {
            return Err(invalid("l_count must be at least 1"));
        }
        let matrices = if shared {
            let a = gen_orthoprojector(m, n, rng)?;
            vec![a; l_count]
        } else {
            (0..l_count)
                .map(|_| gen_orthoprojector(m, n, rng))
                .collect::<Result<Vec<_>>>()?
        };
        Self::build(matrices, noise_sigma2, true)
    }

    /// Wraps explicit matrices; `shared_matrix` is set when all are bitwise equal.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>, noise_sigma2: f64) -> Result<Self> {
        Self::build(matrices, noise_sigma2, true)
    }

    fn build(matrices: Vec<DMatrix<f64>>, noise_sigma2: f64, identity: bool) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| invalid("at least one measurement matrix is required"))?;
        let (m, n) = first.shape();
        if m == 0 || m > n {
            return Err(invalid(format!("measurement matrix must have 1 <= M <= N, got {m}x{n}")));
        }
        if matrices.iter().any(|b| b.shape() != (m, n)) {
            return Err(invalid("measurement matrices differ in shape"));
        }
        if !(noise_sigma2 >= 0.0) || !noise_sigma2.is_finite() {
            return Err(invalid("noise variance must be finite and nonnegative"));
        }
        let shared_matrix = matrices.iter().all(|b| b == first);
        Ok(Self {
            m,
            n,
            matrices,
            basis_is_identity: identity,
            shared_matrix,
            noise_sigma2,
        })
    }

    /// Multiplies a sparsity basis into every matrix: `B_l <- A_l Φ`.
    pub fn with_basis(self, phi: &DMatrix<f64>) -> Result<Self> {
        if phi.shape() != (self.n, self.n) {
            return Err(invalid(format!(
                "basis must be {}x{}, got {:?}",
                self.n,
                self.n,
                phi.shape()
            )));
        }
        let matrices = self.matrices.iter().map(|a| a * phi).collect();
        Self::build(matrices, self.noise_sigma2, false)
    }

    pub fn l_count(&self) -> usize {
        self.matrices.len()
    }
}

/// Observation vectors `y_l` plus the optional MAC output `z = Σ y_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub per_node: Vec<DVector<f64>>,
    pub mac_output: Option<DVector<f64>>,
    /// Variance of `w = Σ v_l`, i.e. `L σ_v²`.
    pub mac_noise_sigma2: f64,
}

impl ObservationSet {
    /// Computes `z = Σ_l y_l`, stores it and returns it.
    pub fn mac_aggregate(&mut self) -> &DVector<f64> {
        let m = self.per_node.first().map_or(0, |y| y.len());
        let z = self
            .per_node
            .iter()
            .fold(DVector::zeros(m), |acc, y| acc + y);
        self.mac_output.insert(z)
    }

    pub fn l_count(&self) -> usize {
        self.per_node.len()
    }
}

/// `k` distinct indices drawn uniformly from `[0, n)`, returned ascending.
pub fn gen_support<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k >= n {
        return Err(invalid(format!("support size must satisfy 1 <= k < n, got k={k}, n={n}")));
    }
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Nonzero amplitudes drawn independently and uniformly on `[amp_low, amp_high]`.
///
/// Exact zeros are redrawn so the realized support always equals `support`.
pub fn gen_signals<R: Rng + ?Sized>(
    support: &[usize],
    n: usize,
    l_count: usize,
    amp_low: f64,
    amp_high: f64,
    rng: &mut R,
) -> Result<JointSparseEnsemble> {
    if support.is_empty() {
        return Err(invalid("support must be nonempty"));
    }
    if l_count == 0 {
        return Err(invalid("l_count must be at least 1"));
    }
    if !(amp_low <= amp_high) || !amp_low.is_finite() || !amp_high.is_finite() {
        return Err(invalid(format!("amplitude range [{amp_low}, {amp_high}] is invalid")));
    }
    if amp_low == 0.0 && amp_high == 0.0 {
        return Err(invalid("amplitude range must contain nonzero values"));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != support.len() || sorted.last().is_some_and(|&i| i >= n) {
        return Err(invalid("support must hold distinct indices below n"));
    }
    let dist = Uniform::new_inclusive(amp_low, amp_high)
        .map_err(|e| invalid(format!("amplitude range: {e}")))?;
    let signals = (0..l_count)
        .map(|_| {
            let mut s = DVector::zeros(n);
            for &i in &sorted {
                let mut v = dist.sample(rng);
                while v == 0.0 {
                    v = dist.sample(rng);
                }
                s[i] = v;
            }
            s
        })
        .collect();
    Ok(JointSparseEnsemble::assemble(n, sorted, signals))
}

/// An `m x n` matrix with orthonormal rows (`A Aᵀ = I_m`).
///
/// Orthonormalizes the columns of an `n x m` standard normal matrix with a
/// thin QR factorization and transposes; each row is then sign-normalized so
/// that its first nonzero entry is positive.
pub fn gen_orthoprojector<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if m == 0 || m > n {
        return Err(invalid(format!("orthoprojector needs 1 <= m <= n, got m={m}, n={n}")));
    }
    // Row-major draw order of the m x n Gaussian matrix.
    let mut g = DMatrix::<f64>::zeros(n, m);
    for i in 0..m {
        for j in 0..n {
            g[(j, i)] = rng.sample(StandardNormal);
        }
    }
    let q = g.qr().q();
    let mut a = q.transpose();
    for mut row in a.row_iter_mut() {
        if let Some(&first) = row.iter().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                row.neg_mut();
            }
        }
    }
    Ok(a)
}

/// `y_l = B_l s_l + v_l` with iid `N(0, σ_v²)` noise.
pub fn measure<R: Rng + ?Sized>(
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
    rng: &mut R,
) -> Result<ObservationSet> {
    if ensemble.l_count() != meas.l_count() {
        return Err(invalid(format!(
            "ensemble has {} nodes but measurement ensemble has {}",
            ensemble.l_count(),
            meas.l_count()
        )));
    }
    if ensemble.n != meas.n {
        return Err(invalid(format!(
            "signal length {} does not match matrix width {}",
            ensemble.n, meas.n
        )));
    }
    let sigma = meas.noise_sigma2.sqrt();
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(format!("noise: {e}")))?;
    let per_node = ensemble
        .signals
        .iter()
        .zip(&meas.matrices)
        .map(|(s, b)| {
            let mut y = b * s;
            if sigma > 0.0 {
                for v in y.iter_mut() {
                    *v += noise.sample(rng);
                }
            }
            y
        })
        .collect();
    Ok(ObservationSet {
        per_node,
        mac_output: None,
        mac_noise_sigma2: meas.noise_sigma2 * ensemble.l_count() as f64,
    })
}

/// `s̄ = Σ_l s_l`.
pub fn sum_signal(ensemble: &JointSparseEnsemble) -> DVector<f64> {
    ensemble
        .signals
        .iter()
        .fold(DVector::zeros(ensemble.n), |acc, s| acc + s)
}

/// Average SNR in dB: `10 log10( (1/L) Σ ‖s_l‖² / (N σ_v²) )`.
pub fn average_snr(ensemble: &JointSparseEnsemble, meas: &MeasurementEnsemble) -> Result<f64> {
    if meas.noise_sigma2 <= 0.0 {
        return Err(Error::UndefinedSnr);
    }
    let l = ensemble.l_count() as f64;
    let energy: f64 = ensemble.signals.iter().map(|s| s.norm_squared()).sum::<f64>() / l;
    Ok(10.0 * (energy / (ensemble.n as f64 * meas.noise_sigma2)).log10())
}
