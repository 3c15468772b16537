//! Centralized greedy recovery: OMP on a single measurement vector and
//! simultaneous OMP across several nodes with their own dictionaries.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::sensing::{MeasurementEnsemble, ObservationSet};

/// Gram matrices with a 1-norm condition number above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Selection state of one greedy run.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyState {
    /// Chosen column indices in selection order.
    pub selected: Vec<usize>,
    /// One residual per node.
    pub residuals: Vec<DVector<f64>>,
    pub iteration: usize,
}

impl GreedyState {
    pub fn new(observations: &[DVector<f64>]) -> Self {
        Self {
            selected: Vec::new(),
            residuals: observations.to_vec(),
            iteration: 0,
        }
    }

    /// Appends `indices` and re-projects every node's observation.
    pub fn admit(
        &mut self,
        indices: &[usize],
        observations: &[DVector<f64>],
        dictionaries: &[&DMatrix<f64>],
    ) -> Result<()> {
        for &i in indices {
            debug_assert!(!self.selected.contains(&i), "index {i} selected twice");
            self.selected.push(i);
        }
        for ((r, y), b) in self.residuals.iter_mut().zip(observations).zip(dictionaries) {
            *r = ls_residual(y, b, &self.selected)?;
        }
        self.iteration += 1;
        Ok(())
    }
}

/// `score[ω] = |⟨residual, b_ω⟩|`.
pub fn correlate(residual: &DVector<f64>, dictionary: &DMatrix<f64>) -> DVector<f64> {
    dictionary.tr_mul(residual).abs()
}

/// Index of the largest score outside `excluded`; ties go to the smallest index.
pub fn argmax_excluding(scores: &DVector<f64>, excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `y` minus its orthogonal projection onto the span of the selected columns.
///
/// The projection is solved through the normal equations with a Cholesky
/// factorization. An ill-conditioned Gram matrix is reported as
/// [`Error::SingularProjection`] rather than regularized.
pub fn ls_residual(
    y: &DVector<f64>,
    dictionary: &DMatrix<f64>,
    selected: &[usize],
) -> Result<DVector<f64>> {
    if y.len() != dictionary.nrows() {
        return Err(invalid(format!(
            "observation length {} does not match dictionary rows {}",
            y.len(),
            dictionary.nrows()
        )));
    }
    if selected.is_empty() {
        return Ok(y.clone());
    }
    if let Some(&bad) = selected.iter().find(|&&j| j >= dictionary.ncols()) {
        return Err(invalid(format!("column {bad} out of range")));
    }
    let sub = dictionary.select_columns(selected);
    let gram = sub.tr_mul(&sub);
    let singular = |condition| Error::SingularProjection {
        columns: selected.len(),
        condition,
    };
    let chol = gram.clone().cholesky().ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm1(&gram) * norm1(&chol.inverse());
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(singular(condition));
    }
    let coef = chol.solve(&sub.tr_mul(y));
    Ok(y - sub * coef)
}

fn check_k(k: usize, m: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("sparsity k must be at least 1"));
    }
    if k > m {
        return Err(invalid(format!("sparsity k={k} exceeds measurement count M={m}")));
    }
    if k > n {
        return Err(invalid(format!("sparsity k={k} exceeds dictionary width N={n}")));
    }
    Ok(())
}

/// Standard OMP: exactly `k` selections, returned in selection order.
pub fn omp(y: &DVector<f64>, dictionary: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    simultaneous(std::slice::from_ref(y), &[dictionary], k)
}

/// S-OMP over an observation set whose nodes use their own matrices.
pub fn somp(obs: &ObservationSet, meas: &MeasurementEnsemble, k: usize) -> Result<Vec<usize>> {
    if obs.l_count() != meas.l_count() {
        return Err(invalid("observation and measurement node counts differ"));
    }
    let dicts: Vec<&DMatrix<f64>> = meas.matrices.iter().collect();
    simultaneous(&obs.per_node, &dicts, k)
}

/// S-OMP on explicit `(y_l, B_l)` pairs. Scores are summed in node order.
pub fn simultaneous(
    observations: &[DVector<f64>],
    dictionaries: &[&DMatrix<f64>],
    k: usize,
) -> Result<Vec<usize>> {
    let first = dictionaries
        .first()
        .ok_or_else(|| invalid("at least one node is required"))?;
    if observations.len() != dictionaries.len() {
        return Err(invalid("observation and dictionary counts differ"));
    }
    let (m, n) = first.shape();
    if dictionaries.iter().any(|b| b.shape() != (m, n)) {
        return Err(invalid("dictionaries differ in shape"));
    }
    check_k(k, m, n)?;
    if observations.iter().any(|y| y.len() != m) {
        return Err(invalid(format!("observations must have length {m}")));
    }
    let mut state = GreedyState::new(observations);
    while state.selected.len() < k {
        let scores = summed_scores(&state.residuals, dictionaries);
        let pick = argmax_excluding(&scores, &state.selected)
            .expect("k <= N leaves an unselected column");
        state.admit(&[pick], observations, dictionaries)?;
    }
    Ok(state.selected)
}

pub(crate) fn summed_scores(
    residuals: &[DVector<f64>],
    dictionaries: &[&DMatrix<f64>],
) -> DVector<f64> {
    let n = dictionaries[0].ncols();
    residuals
        .iter()
        .zip(dictionaries)
        .fold(DVector::zeros(n), |acc, (r, b)| acc + correlate(r, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_orthoprojector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn correlate_identity() {
        let mut r = DVector::zeros(4);
        r[0] = 1.0;
        let s = correlate(&r, &DMatrix::identity(4, 4));
        assert_eq!(s.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn correlate_orthogonal_residual() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let r = DVector::from_vec(vec![0.0, 0.0, 5.0]);
        assert!(correlate(&r, &b).iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn correlate_matches_double_loop() {
        let b = gaussian(4, 6, 1);
        let r = DVector::from_iterator(4, gaussian(4, 1, 2).iter().copied());
        let s = correlate(&r, &b);
        for w in 0..6 {
            let mut dot = 0.0;
            for i in 0..4 {
                dot += r[i] * b[(i, w)];
            }
            assert!((s[w] - dot.abs()).abs() <= 1e-12);
        }
    }

    #[test]
    fn argmax_ties_prefer_smaller_index() {
        let s = DVector::from_vec(vec![1.0, 3.0, 3.0, 2.0]);
        assert_eq!(argmax_excluding(&s, &[]), Some(1));
        assert_eq!(argmax_excluding(&s, &[1]), Some(2));
        assert_eq!(argmax_excluding(&s, &[0, 1, 2, 3]), None);
    }

    #[test]
    fn residual_edge_cases() {
        let b = gaussian(5, 8, 3);
        let y = DVector::from_iterator(5, gaussian(5, 1, 4).iter().copied());
        assert_eq!(ls_residual(&y, &b, &[]).unwrap(), y);

        let inside = b.column(2) * 1.5 - b.column(6) * 0.25;
        let r = ls_residual(&inside, &b, &[2, 6]).unwrap();
        assert!(r.norm() <= 1e-10 * inside.norm());
    }

    #[test]
    fn residual_matches_independent_least_squares() {
        // Oracle: minimize ‖y - B_S c‖ with an SVD solve, independent of the
        // normal-equation path.
        let b = gaussian(5, 8, 5);
        let y = DVector::from_iterator(5, gaussian(5, 1, 6).iter().copied());
        let sel = [1, 4];
        let sub = b.select_columns(&sel);
        let coef = sub.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        let expected = &y - &sub * coef;
        let r = ls_residual(&y, &b, &sel).unwrap();
        assert!((r - &expected).amax() <= 1e-9);
        for &j in &sel {
            let bj = b.column(j);
            assert!(expected.dot(&bj).abs() <= 1e-8 * expected.norm() * bj.norm() + 1e-14);
        }
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let mut b = gaussian(4, 5, 7);
        let c = b.column(0).clone_owned();
        b.set_column(3, &c);
        let y = DVector::from_element(4, 1.0);
        assert!(matches!(
            ls_residual(&y, &b, &[0, 3]),
            Err(Error::SingularProjection { .. })
        ));
    }

    #[test]
    fn omp_identity_dictionary() {
        let mut y = DVector::zeros(6);
        y[1] = 3.0;
        y[4] = -2.0;
        let mut sel = omp(&y, &DMatrix::identity(6, 6), 2).unwrap();
        assert_eq!(sel, vec![1, 4]);
        sel.sort_unstable();
        assert_eq!(sel, vec![1, 4]);
    }

    #[test]
    fn omp_orthonormal_columns_first_iteration() {
        let q = gaussian(6, 3, 8).qr().q();
        let y = q.column(2) * 4.0;
        assert_eq!(omp(&y, &q, 1).unwrap(), vec![2]);
    }

    #[test]
    fn omp_parameter_checks() {
        let b = DMatrix::identity(3, 5);
        let y = DVector::zeros(3);
        assert!(omp(&y, &b, 0).is_err());
        assert!(omp(&y, &b, 4).is_err());
        assert!(omp(&DVector::zeros(2), &b, 1).is_err());
    }

    #[test]
    fn somp_single_node_equals_omp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = gen_orthoprojector(6, 16, &mut rng).unwrap();
        let y = DVector::from_iterator(6, gaussian(6, 1, 12).iter().copied());
        assert_eq!(simultaneous(std::slice::from_ref(&y), &[&b], 3).unwrap(), omp(&y, &b, 3).unwrap());
        let copies = vec![y.clone(); 3];
        assert_eq!(simultaneous(&copies, &[&b, &b, &b], 3).unwrap(), omp(&y, &b, 3).unwrap());
    }

    #[test]
    fn residual_orthogonal_to_selected_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = gen_orthoprojector(10, 30, &mut rng).unwrap();
        let y = DVector::from_iterator(10, gaussian(10, 1, 14).iter().copied());
        let mut state = GreedyState::new(std::slice::from_ref(&y));
        for _ in 0..5 {
            let s = correlate(&state.residuals[0], &b);
            let pick = argmax_excluding(&s, &state.selected).unwrap();
            state.admit(&[pick], std::slice::from_ref(&y), &[&b]).unwrap();
            let r = &state.residuals[0];
            for &j in &state.selected {
                let bj = b.column(j);
                assert!(r.dot(&bj).abs() <= 1e-8 * r.norm() * bj.norm() + 1e-14);
            }
        }
        assert_eq!(state.iteration, 5);
    }
}
