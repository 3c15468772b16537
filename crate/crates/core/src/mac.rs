//! Analysis of fusion over a multiple access channel (MAC).
//!
//! Covers support recovery from the summed observation, the interleaved
//! block dictionary of the data-separation reformulation, the block-RIP
//! measurement bound, Kullback-Leibler distances between support hypotheses
//! for MAC and parallel-channel (PAC) outputs, the Fano lower bound on the
//! error probability and the Gaussian-ensemble necessary measurement count.
//! All logarithms are natural.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combin::{binomial, for_each_combination, ln_binomial};
use crate::error::{invalid, Error, Result};
use crate::greedy::omp;
use crate::sensing::{gen_support, sum_signal, JointSparseEnsemble, MeasurementEnsemble};

/// Default cap on ordered support pairs for exact KL averaging.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// OMP applied to the MAC output `z` with the shared dictionary.
pub fn mac_omp(z: &DVector<f64>, dictionary: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    omp(z, dictionary, k)
}

/// `D = (d_0 | … | d_{N-1})` with `d_j = (b_{0j} … b_{(L-1)j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDictionary {
    pub matrix: DMatrix<f64>,
    pub block_size: usize,
    pub block_count: usize,
}

impl BlockDictionary {
    /// Column `L j + l` of `D`.
    pub fn column_index(&self, block: usize, node: usize) -> usize {
        block * self.block_size + node
    }
}

pub fn build_block_dictionary(meas: &MeasurementEnsemble) -> BlockDictionary {
    let l = meas.l_count();
    let matrix = DMatrix::from_fn(meas.m, l * meas.n, |i, col| {
        meas.matrices[col % l][(i, col / l)]
    });
    BlockDictionary {
        matrix,
        block_size: l,
        block_count: meas.n,
    }
}

/// Block-sparse coefficient vector `c` whose block `j` is `(s_0(j) … s_{L-1}(j))`.
pub fn block_coefficients(ensemble: &JointSparseEnsemble) -> DVector<f64> {
    let l = ensemble.l_count();
    DVector::from_fn(l * ensemble.n, |row, _| ensemble.signals[row % l][row / l])
}

fn check_bound_domain(n: usize, k: usize, l_count: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(invalid(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    if l_count == 0 {
        return Err(invalid("l_count must be positive"));
    }
    Ok(())
}

/// Right-hand side of the block-RIP measurement condition,
/// `36/(7 δ0) (ln(2 C(N,k)) + k L ln(12/δ0) + t)`.
pub fn block_rip_measurement_value(n: usize, k: usize, l_count: usize, delta0: f64, slack_t: f64) -> Result<f64> {
    check_bound_domain(n, k, l_count)?;
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(invalid(format!("delta0 must lie in (0, 1), got {delta0}")));
    }
    if !(slack_t > 0.0) || !slack_t.is_finite() {
        return Err(invalid(format!("slack t must be positive, got {slack_t}")));
    }
    let ln_term = std::f64::consts::LN_2 + ln_binomial(n, k);
    let block_term = (k * l_count) as f64 * (12.0 / delta0).ln();
    Ok(36.0 / (7.0 * delta0) * (ln_term + block_term + slack_t))
}

/// Ceiling of [`block_rip_measurement_value`].
pub fn block_rip_measurement_bound(n: usize, k: usize, l_count: usize, delta0: f64, slack_t: f64) -> Result<u64> {
    Ok(block_rip_measurement_value(n, k, l_count, delta0, slack_t)?.ceil() as u64)
}

/// `max{ ln C(N,k) / (8 k L γ), ln(N-k) / (4 L γ) }`.
pub fn gauss_necessary_value(n: usize, k: usize, l_count: usize, gamma_c_min: f64) -> Result<f64> {
    check_bound_domain(n, k, l_count)?;
    if !(gamma_c_min > 0.0) || !gamma_c_min.is_finite() {
        return Err(invalid(format!("gamma_c_min must be positive, got {gamma_c_min}")));
    }
    let l = l_count as f64;
    let first = ln_binomial(n, k) / (8.0 * k as f64 * l * gamma_c_min);
    let second = ((n - k) as f64).ln() / (4.0 * l * gamma_c_min);
    Ok(first.max(second))
}

/// Ceiling of [`gauss_necessary_value`].
pub fn gauss_necessary_bound(n: usize, k: usize, l_count: usize, gamma_c_min: f64) -> Result<u64> {
    Ok(gauss_necessary_value(n, k, l_count, gamma_c_min)?.ceil() as u64)
}

/// Smallest nonzero coefficient magnitude over all nodes.
pub fn min_nonzero_magnitude(ensemble: &JointSparseEnsemble) -> f64 {
    ensemble
        .signals
        .iter()
        .flat_map(|s| ensemble.support.iter().map(move |&j| s[j].abs()))
        .fold(f64::INFINITY, f64::min)
}

/// Minimum component SNR, `(min |s_l(j)|)² / σ_v²`.
pub fn gamma_c_min(ensemble: &JointSparseEnsemble, noise_sigma2: f64) -> Result<f64> {
    if !(noise_sigma2 > 0.0) {
        return Err(Error::UndefinedSnr);
    }
    Ok(min_nonzero_magnitude(ensemble).powi(2) / noise_sigma2)
}

/// Smallest `|s̄(j)|` over the support.
pub fn sbar_min(ensemble: &JointSparseEnsemble) -> f64 {
    let sbar = sum_signal(ensemble);
    ensemble
        .support
        .iter()
        .map(|&j| sbar[j].abs())
        .fold(f64::INFINITY, f64::min)
}

/// Fano lower bound `max(0, 1 - (Ξ + ln 2) / ln Π)` with `Π = C(N,k)`.
pub fn fano_pe_lower(xi: f64, n: usize, k: usize) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(invalid(format!("average KL distance must be nonnegative, got {xi}")));
    }
    if k > n || binomial(n, k).is_some_and(|p| p < 2) {
        return Err(invalid(format!("need at least two hypotheses, C({n},{k}) < 2")));
    }
    let ln_pi = ln_binomial(n, k);
    Ok((1.0 - (xi + std::f64::consts::LN_2) / ln_pi).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Mac,
    Pac,
}

/// Per-node mean vectors `B_l s_{l,U}` under a hypothesized support `U`,
/// where `s_{l,U}` keeps `s_l`'s values on `U` and is zero elsewhere.
struct HypothesisMeans<'a> {
    ensemble: &'a JointSparseEnsemble,
    meas: &'a MeasurementEnsemble,
}

impl HypothesisMeans<'_> {
    fn node_means(&self, support: &[usize]) -> Vec<DVector<f64>> {
        self.ensemble
            .signals
            .iter()
            .zip(&self.meas.matrices)
            .map(|(s, b)| {
                let mut v = DVector::zeros(self.meas.m);
                for &j in support {
                    if s[j] != 0.0 {
                        v.axpy(s[j], &b.column(j), 1.0);
                    }
                }
                v
            })
            .collect()
    }

    fn summary(&self, support: &[usize], channel: Channel) -> Vec<DVector<f64>> {
        let nodes = self.node_means(support);
        match channel {
            Channel::Pac => nodes,
            Channel::Mac => {
                let total = nodes.iter().fold(DVector::zeros(self.meas.m), |acc, v| acc + v);
                vec![total]
            }
        }
    }

    fn distance(&self, a: &[DVector<f64>], b: &[DVector<f64>], channel: Channel) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (y - x).norm_squared()).sum();
        let l = self.ensemble.l_count() as f64;
        match channel {
            Channel::Mac => sq / (2.0 * self.meas.noise_sigma2 * l),
            Channel::Pac => sq / (2.0 * self.meas.noise_sigma2),
        }
    }
}

fn check_kl_inputs(
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
    channel: Channel,
) -> Result<()> {
    if channel == Channel::Mac && !meas.shared_matrix {
        return Err(invalid("MAC KL distance requires a shared measurement matrix"));
    }
    if ensemble.l_count() != meas.l_count() || ensemble.n != meas.n {
        return Err(invalid("ensemble and measurement dimensions disagree"));
    }
    if !(meas.noise_sigma2 > 0.0) {
        return Err(Error::UndefinedSnr);
    }
    Ok(())
}

fn check_supports(a: &[usize], b: &[usize], ensemble: &JointSparseEnsemble) -> Result<()> {
    if a.len() != ensemble.k || b.len() != ensemble.k {
        return Err(invalid("hypothesized supports must have k elements"));
    }
    if a.iter().chain(b).any(|&j| j >= ensemble.n) {
        return Err(invalid("hypothesized support index out of range"));
    }
    Ok(())
}

fn kl_pair(
    support_m: &[usize],
    support_n: &[usize],
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
    channel: Channel,
) -> Result<f64> {
    check_kl_inputs(ensemble, meas, channel)?;
    check_supports(support_m, support_n, ensemble)?;
    let h = HypothesisMeans { ensemble, meas };
    let a = h.summary(support_m, channel);
    let b = h.summary(support_n, channel);
    Ok(h.distance(&a, &b, channel))
}

/// `‖Σ_l (B s_{l,U_n} - B s_{l,U_m})‖² / (2 σ_v² L)`.
pub fn kl_pair_mac(
    support_m: &[usize],
    support_n: &[usize],
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
) -> Result<f64> {
    kl_pair(support_m, support_n, ensemble, meas, Channel::Mac)
}

/// `Σ_l ‖B_l s_{l,U_n} - B_l s_{l,U_m}‖² / (2 σ_v²)`.
pub fn kl_pair_pac(
    support_m: &[usize],
    support_n: &[usize],
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
) -> Result<f64> {
    kl_pair(support_m, support_n, ensemble, meas, Channel::Pac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiOptions {
    /// Largest number of ordered pairs averaged exactly.
    pub enumeration_cap: u128,
    /// Pairs to sample when the cap is exceeded; `None` makes that an error.
    pub sample_pairs: Option<usize>,
    pub seed: u64,
}

impl Default for XiOptions {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            sample_pairs: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiEstimate {
    pub mean: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    pub pairs: u128,
    pub exact: bool,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Average KL distance `Ξ` over ordered pairs of size-`k` supports.
pub fn xi_average(
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
    channel: Channel,
    options: XiOptions,
) -> Result<XiEstimate> {
    check_kl_inputs(ensemble, meas, channel)?;
    let (n, k) = (ensemble.n, ensemble.k);
    let h = HypothesisMeans { ensemble, meas };
    let pi = binomial(n, k);
    let ordered = pi.and_then(|p| p.checked_mul(p));

    match ordered {
        Some(pairs) if pairs <= options.enumeration_cap => {
            let mut summaries = Vec::with_capacity(pi.unwrap_or(0) as usize);
            for_each_combination(n, k, |u| summaries.push(h.summary(u, channel)));
            let mut acc = CompensatedSum::default();
            for a in &summaries {
                for b in &summaries {
                    acc.add(h.distance(a, b, channel));
                }
            }
            Ok(XiEstimate {
                mean: acc.total() / pairs as f64,
                stderr: 0.0,
                pairs,
                exact: true,
            })
        }
        _ => {
            let count = options.sample_pairs.ok_or(Error::EnumerationTooLarge {
                count: ordered.unwrap_or(u128::MAX),
                cap: options.enumeration_cap,
            })?;
            if count < 2 {
                return Err(invalid("sampled mode needs at least two pairs"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            let mut sum = CompensatedSum::default();
            let mut sum_sq = CompensatedSum::default();
            for _ in 0..count {
                let um = gen_support(n, k, &mut rng)?;
                let un = gen_support(n, k, &mut rng)?;
                let d = h.distance(&h.summary(&um, channel), &h.summary(&un, channel), channel);
                sum.add(d);
                sum_sq.add(d * d);
            }
            let c = count as f64;
            let mean = sum.total() / c;
            let var = ((sum_sq.total() - c * mean * mean) / (c - 1.0)).max(0.0);
            Ok(XiEstimate {
                mean,
                stderr: (var / c).sqrt(),
                pairs: count as u128,
                exact: false,
            })
        }
    }
}

/// A reported value together with the formula that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Labeled<T> {
    pub value: T,
    pub formula: &'static str,
}

pub const FORMULA_BLOCK_RIP: &str = "block_rip: M >= 36/(7*delta0) * (ln(2*C(N,k)) + k*L*ln(12/delta0) + t)";
pub const FORMULA_GAUSS: &str = "gauss_necessary: M > max(ln C(N,k) / (8*k*L*gamma_c_min), ln(N-k) / (4*L*gamma_c_min))";
pub const FORMULA_FANO: &str = "fano: P_e >= max(0, 1 - (Xi + ln 2) / ln C(N,k))";
pub const FORMULA_XI_MAC: &str = "xi_mac: mean over support pairs of ||sum_l B(s_l,Un - s_l,Um)||^2 / (2*sigma2*L)";
pub const FORMULA_XI_PAC: &str = "xi_pac: mean over support pairs of sum_l ||B_l(s_l,Un - s_l,Um)||^2 / (2*sigma2)";
pub const FORMULA_GAMMA: &str = "gamma_c_min = (min_{l,j} |s_l(j)|)^2 / sigma2";
pub const FORMULA_SBAR: &str = "sbar_min = min_{j in U} |sum_l s_l(j)|";

/// Evaluated analytical quantities for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub k: usize,
    pub l_count: usize,
    pub m: usize,
    pub delta0: f64,
    pub slack_t: f64,
    pub m_block_rip: Labeled<u64>,
    pub m_block_rip_raw: f64,
    pub m_gauss_lower: Labeled<u64>,
    pub m_gauss_lower_raw: f64,
    pub gamma_c_min: Labeled<f64>,
    pub sbar_min: Labeled<f64>,
    pub xi_mac: Labeled<XiEstimate>,
    pub xi_pac: Labeled<XiEstimate>,
    /// Fano bound evaluated with `xi_mac`.
    pub fano_pe_lower: Labeled<f64>,
    /// Fano bound evaluated with `xi_pac`.
    pub fano_pe_lower_pac: Labeled<f64>,
}

/// Parameters for [`bound_report`] beyond the ensemble itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub delta0: f64,
    pub slack_t: f64,
    /// Overrides the ensemble-derived minimum component SNR.
    pub gamma_c_min: Option<f64>,
    pub xi: XiOptions,
}

pub fn bound_report(
    ensemble: &JointSparseEnsemble,
    meas: &MeasurementEnsemble,
    inputs: BoundInputs,
) -> Result<BoundReport> {
    let (n, k, l) = (ensemble.n, ensemble.k, ensemble.l_count());
    let gamma = match inputs.gamma_c_min {
        Some(g) => g,
        None => gamma_c_min(ensemble, meas.noise_sigma2)?,
    };
    let rip_raw = block_rip_measurement_value(n, k, l, inputs.delta0, inputs.slack_t)?;
    let gauss_raw = gauss_necessary_value(n, k, l, gamma)?;
    let xi_mac = xi_average(ensemble, meas, Channel::Mac, inputs.xi)?;
    let xi_pac = xi_average(ensemble, meas, Channel::Pac, inputs.xi)?;
    Ok(BoundReport {
        n,
        k,
        l_count: l,
        m: meas.m,
        delta0: inputs.delta0,
        slack_t: inputs.slack_t,
        m_block_rip: Labeled {
            value: rip_raw.ceil() as u64,
            formula: FORMULA_BLOCK_RIP,
        },
        m_block_rip_raw: rip_raw,
        m_gauss_lower: Labeled {
            value: gauss_raw.ceil() as u64,
            formula: FORMULA_GAUSS,
        },
        m_gauss_lower_raw: gauss_raw,
        gamma_c_min: Labeled {
            value: gamma,
            formula: FORMULA_GAMMA,
        },
        sbar_min: Labeled {
            value: sbar_min(ensemble),
            formula: FORMULA_SBAR,
        },
        fano_pe_lower: Labeled {
            value: fano_pe_lower(xi_mac.mean, n, k)?,
            formula: FORMULA_FANO,
        },
        fano_pe_lower_pac: Labeled {
            value: fano_pe_lower(xi_pac.mean, n, k)?,
            formula: FORMULA_FANO,
        },
        xi_mac: Labeled {
            value: xi_mac,
            formula: FORMULA_XI_MAC,
        },
        xi_pac: Labeled {
            value: xi_pac,
            formula: FORMULA_XI_PAC,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{gen_signals, measure};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn small(n: usize, k: usize, l: usize, seed: u64) -> (JointSparseEnsemble, MeasurementEnsemble) {
        let mut r = rng(seed);
        let support = gen_support(n, k, &mut r).unwrap();
        let e = gen_signals(&support, n, l, 10.0, 15.0, &mut r).unwrap();
        let meas = MeasurementEnsemble::orthoprojectors(n / 2, n, l, true, 0.01, &mut r).unwrap();
        (e, meas)
    }

    #[test]
    fn block_dictionary_layout() {
        let b0 = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b1 = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let meas = MeasurementEnsemble::from_matrices(vec![b0.clone(), b1], 0.0).unwrap();
        let d = build_block_dictionary(&meas);
        // (b_00, b_10, b_01, b_11)
        assert_eq!(d.matrix.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(d.column_index(1, 0), 2);

        let single = MeasurementEnsemble::from_matrices(vec![b0.clone()], 0.0).unwrap();
        assert_eq!(build_block_dictionary(&single).matrix, b0);
    }

    #[test]
    fn block_dictionary_identity() {
        for seed in 0..100 {
            let mut r = rng(seed);
            let e = gen_signals(&[1, 3], 5, 3, -2.0, 2.0, &mut r).unwrap();
            let meas = MeasurementEnsemble::orthoprojectors(4, 5, 3, false, 0.0, &mut r).unwrap();
            let d = build_block_dictionary(&meas);
            let lhs = &d.matrix * block_coefficients(&e);
            let rhs = e
                .signals
                .iter()
                .zip(&meas.matrices)
                .fold(DVector::zeros(4), |acc, (s, b)| acc + b * s);
            assert!((lhs - rhs).norm() <= 1e-10);
        }
    }

    #[test]
    fn rip_bound_properties() {
        let a = block_rip_measurement_value(256, 5, 10, 0.5, 1.0).unwrap();
        let b = block_rip_measurement_value(256, 5, 11, 0.5, 1.0).unwrap();
        assert!(b > a);
        let c = block_rip_measurement_value(256, 5, 10, 0.5, 2.0).unwrap();
        assert!((c - a - 36.0 / 3.5).abs() < 1e-9);
        assert!(block_rip_measurement_bound(256, 5, 10, 1.0, 1.0).is_err());
        assert!(block_rip_measurement_bound(256, 5, 10, 0.5, 0.0).is_err());
        assert!(block_rip_measurement_bound(5, 5, 10, 0.5, 1.0).is_err());
    }

    #[test]
    fn gauss_bound_properties() {
        let mut prev = f64::INFINITY;
        for l in 1..20 {
            let v = gauss_necessary_value(256, 5, l, 1e4).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for g in [0.01, 0.1, 1.0, 10.0] {
            let v = gauss_necessary_value(256, 5, 10, g).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(gauss_necessary_bound(256, 5, 10, 0.0).is_err());
    }

    #[test]
    fn fano_closed_forms() {
        // Π = C(4,1) = 4.
        let p = fano_pe_lower(0.0, 4, 1).unwrap();
        assert!((p - (1.0 - 2f64.ln() / 4f64.ln())).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
        let vacuous = 4f64.ln() - 2f64.ln();
        assert_eq!(fano_pe_lower(vacuous + 1e-9, 4, 1).unwrap(), 0.0);
        assert!(fano_pe_lower(0.0, 2, 2).is_err());
        assert!(fano_pe_lower(-1.0, 4, 1).is_err());
    }

    #[test]
    fn kl_pairs_basic() {
        let (e, meas) = small(8, 2, 3, 1);
        let u = e.support.clone();
        assert_eq!(kl_pair_mac(&u, &u, &e, &meas).unwrap(), 0.0);
        assert_eq!(kl_pair_pac(&u, &u, &e, &meas).unwrap(), 0.0);
        let other = vec![(u[0] + 1) % 8, u[1]];
        let other = if other[0] == other[1] { vec![u[0], (u[1] + 1) % 8] } else { other };
        let ab = kl_pair_mac(&u, &other, &e, &meas).unwrap();
        let ba = kl_pair_mac(&other, &u, &e, &meas).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(kl_pair_pac(&u, &other, &e, &meas).unwrap() >= ab);
    }

    #[test]
    fn kl_pair_matches_explicit_submatrices() {
        // Oracle assembles B_U and s_{l,U} explicitly.
        let (e, meas) = small(10, 2, 4, 7);
        let b = &meas.matrices[0];
        let um = vec![e.support[0], 9 - e.support[0].min(8)];
        let um = if um[0] == um[1] { vec![um[0], (um[0] + 3) % 10] } else { um };
        let un = e.support.clone();
        let mut total = DVector::zeros(meas.m);
        let mut pac = 0.0;
        for s in &e.signals {
            let restrict = |u: &[usize]| {
                let sub = b.select_columns(u);
                let coef = DVector::from_iterator(u.len(), u.iter().map(|&j| s[j]));
                sub * coef
            };
            let beta = restrict(&un) - restrict(&um);
            pac += beta.norm_squared();
            total += beta;
        }
        let l = e.l_count() as f64;
        let mac_expected = total.norm_squared() / (2.0 * 0.01 * l);
        let pac_expected = pac / (2.0 * 0.01);
        assert!((kl_pair_mac(&um, &un, &e, &meas).unwrap() - mac_expected).abs() <= 1e-10 * mac_expected.max(1.0));
        assert!((kl_pair_pac(&um, &un, &e, &meas).unwrap() - pac_expected).abs() <= 1e-10 * pac_expected.max(1.0));
    }

    #[test]
    fn identical_signals_give_equal_kl() {
        let (e, meas) = small(8, 2, 1, 3);
        let same = JointSparseEnsemble::from_signals(vec![e.signals[0].clone(); 4]).unwrap();
        let meas4 = MeasurementEnsemble::from_matrices(vec![meas.matrices[0].clone(); 4], 0.01).unwrap();
        let other = vec![0, 1];
        let a = kl_pair_mac(&same.support, &other, &same, &meas4).unwrap();
        let b = kl_pair_pac(&same.support, &other, &same, &meas4).unwrap();
        assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        let xm = xi_average(&same, &meas4, Channel::Mac, XiOptions::default()).unwrap();
        let xp = xi_average(&same, &meas4, Channel::Pac, XiOptions::default()).unwrap();
        assert!((xm.mean - xp.mean).abs() <= 1e-10 * xp.mean.max(1.0));
    }

    #[test]
    fn xi_exact_matches_double_loop() {
        let (e, meas) = small(5, 1, 3, 4);
        let xi = xi_average(&e, &meas, Channel::Mac, XiOptions::default()).unwrap();
        assert!(xi.exact);
        assert_eq!(xi.pairs, 25);
        let mut sum = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                sum += kl_pair_mac(&[a], &[b], &e, &meas).unwrap();
            }
        }
        assert!((xi.mean - sum / 25.0).abs() <= 1e-12 * sum.max(1.0));

        let pac = xi_average(&e, &meas, Channel::Pac, XiOptions::default()).unwrap();
        assert!(xi.mean <= pac.mean + 1e-10);

        let p = fano_pe_lower(xi.mean, 5, 1).unwrap();
        let hand = (1.0 - (xi.mean + 2f64.ln()) / 5f64.ln()).max(0.0);
        assert!((p - hand).abs() <= 1e-12);
    }

    #[test]
    fn xi_cap_and_sampling() {
        let (e, meas) = small(40, 3, 2, 5);
        let strict = XiOptions {
            enumeration_cap: 100,
            sample_pairs: None,
            seed: 0,
        };
        assert!(matches!(
            xi_average(&e, &meas, Channel::Mac, strict),
            Err(Error::EnumerationTooLarge { .. })
        ));
        let sampled = XiOptions {
            sample_pairs: Some(500),
            ..strict
        };
        let est = xi_average(&e, &meas, Channel::Mac, sampled).unwrap();
        assert!(!est.exact);
        assert!(est.stderr > 0.0);
        assert_eq!(est, xi_average(&e, &meas, Channel::Mac, sampled).unwrap());
    }

    #[test]
    fn mac_requires_shared_matrix() {
        let mut r = rng(2);
        let e = gen_signals(&[1], 6, 2, 1.0, 2.0, &mut r).unwrap();
        let meas = MeasurementEnsemble::orthoprojectors(3, 6, 2, false, 0.01, &mut r).unwrap();
        assert!(kl_pair_mac(&[1], &[2], &e, &meas).is_err());
        assert!(kl_pair_pac(&[1], &[2], &e, &meas).is_ok());
    }

    #[test]
    fn mac_omp_single_node_and_identity() {
        let mut r = rng(8);
        let e = gen_signals(&[2, 7], 12, 1, 10.0, 15.0, &mut r).unwrap();
        let meas = MeasurementEnsemble::orthoprojectors(6, 12, 1, true, 0.01, &mut r).unwrap();
        let mut obs = measure(&e, &meas, &mut r).unwrap();
        let z = obs.mac_aggregate().clone();
        assert_eq!(
            mac_omp(&z, &meas.matrices[0], 2).unwrap(),
            omp(&obs.per_node[0], &meas.matrices[0], 2).unwrap()
        );

        let e = gen_signals(&[2, 7], 12, 4, 10.0, 15.0, &mut r).unwrap();
        let id = MeasurementEnsemble::from_matrices(vec![DMatrix::identity(12, 12); 4], 0.0).unwrap();
        let mut obs = measure(&e, &id, &mut r).unwrap();
        let z = obs.mac_aggregate().clone();
        let mut got = mac_omp(&z, &id.matrices[0], 2).unwrap();
        got.sort_unstable();
        assert_eq!(got, vec![2, 7]);
    }

    #[test]
    fn component_snr() {
        let s = DVector::from_vec(vec![0.0, 3.0, -2.0]);
        let t = DVector::from_vec(vec![0.0, 5.0, 4.0]);
        let e = JointSparseEnsemble::from_signals(vec![s, t]).unwrap();
        assert!((gamma_c_min(&e, 0.5).unwrap() - 8.0).abs() < 1e-12);
        assert!((sbar_min(&e) - 2.0).abs() < 1e-12);
        assert!(gamma_c_min(&e, 0.0).is_err());
    }

    #[test]
    fn report_for_identical_signals() {
        let (e, meas) = small(6, 1, 1, 6);
        let same = JointSparseEnsemble::from_signals(vec![e.signals[0].clone(); 2]).unwrap();
        let meas2 = MeasurementEnsemble::from_matrices(vec![meas.matrices[0].clone(); 2], 0.01).unwrap();
        let report = bound_report(
            &same,
            &meas2,
            BoundInputs {
                delta0: 0.5,
                slack_t: 1.0,
                gamma_c_min: None,
                xi: XiOptions::default(),
            },
        )
        .unwrap();
        let (xm, xp) = (report.xi_mac.value.mean, report.xi_pac.value.mean);
        assert!((xm - xp).abs() <= 1e-10 * xp.max(1.0));
        let hand = (1.0 - (xm + 2f64.ln()) / 6f64.ln()).max(0.0);
        assert!((report.fano_pe_lower.value - hand).abs() <= 1e-12);
    }
}
