//! Linear readout trained by ridge regression.
//!
//! `W_out = Y S^T (S S^T + beta I)^+`. With `beta > 0` the system is symmetric
//! positive definite and is solved by Cholesky; with `beta = 0` the
//! pseudoinverse of `S` is formed from its SVD (`S^T (S S^T)^+ = S^+`), with
//! singular values below `1e-12 * sigma_max` dropped.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SVD_RELATIVE_CUTOFF: f64 = 1e-12;

/// One state vector per column, `N^r x S_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(DMatrix<f64>);

impl StateMatrix {
    pub fn new(states: DMatrix<f64>) -> Result<Self> {
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("state matrix"));
        }
        Ok(Self(states))
    }

    /// Builds the matrix from per-step state vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::dims(
                format!("{rows} rows"),
                format!("{} rows", bad.len()),
            ));
        }
        let m = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
        Self::new(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn state_len(&self) -> usize {
        self.0.nrows()
    }

    pub fn steps(&self) -> usize {
        self.0.ncols()
    }
}

/// Targets, `N^out x S_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix(DMatrix<f64>);

impl TargetMatrix {
    pub fn new(targets: DMatrix<f64>) -> Result<Self> {
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("target matrix"));
        }
        Ok(Self(targets))
    }

    /// Single-output targets.
    pub fn from_row(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, values.len(), values))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReadoutJson", into = "ReadoutJson")]
pub struct ReadoutWeights {
    pub weights: DMatrix<f64>,
    pub ridge_beta: f64,
}

/// Wire form: row-major weights plus dimensions.
#[derive(Serialize, Deserialize)]
struct ReadoutJson {
    rows: usize,
    cols: usize,
    ridge_beta: f64,
    weights: Vec<f64>,
}

impl From<ReadoutWeights> for ReadoutJson {
    fn from(r: ReadoutWeights) -> Self {
        let (rows, cols) = r.weights.shape();
        let weights = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| r.weights[(i, j)])
            .collect();
        ReadoutJson {
            rows,
            cols,
            ridge_beta: r.ridge_beta,
            weights,
        }
    }
}

impl TryFrom<ReadoutJson> for ReadoutWeights {
    type Error = String;

    fn try_from(j: ReadoutJson) -> Result<Self, String> {
        if j.weights.len() != j.rows * j.cols {
            return Err(format!(
                "readout has {} weights for a {}x{} matrix",
                j.weights.len(),
                j.rows,
                j.cols
            ));
        }
        if j.weights.iter().any(|v| !v.is_finite()) || j.ridge_beta.is_nan() || j.ridge_beta < 0.0 {
            return Err("readout weights must be finite and ridge_beta nonnegative".into());
        }
        Ok(ReadoutWeights {
            weights: DMatrix::from_row_slice(j.rows, j.cols, &j.weights),
            ridge_beta: j.ridge_beta,
        })
    }
}

impl ReadoutWeights {
    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn state_len(&self) -> usize {
        self.weights.ncols()
    }
}

/// Precomputed pieces of one regression so several ridge strengths can share
/// the `S S^T` product.
pub struct RidgeSystem<'a> {
    states: &'a StateMatrix,
    targets: &'a TargetMatrix,
    gram: Option<DMatrix<f64>>,
    cross: Option<DMatrix<f64>>,
}

impl<'a> RidgeSystem<'a> {
    pub fn new(states: &'a StateMatrix, targets: &'a TargetMatrix) -> Result<Self> {
        let (s, y) = (states.matrix(), targets.matrix());
        if s.ncols() != y.ncols() {
            return Err(Error::dims(
                format!("{} target columns", s.ncols()),
                format!("{} target columns", y.ncols()),
            ));
        }
        if s.ncols() == 0 || s.nrows() == 0 || y.nrows() == 0 {
            return Err(Error::dims(
                "at least one state, output and column",
                format!("{}x{} states, {} outputs", s.nrows(), s.ncols(), y.nrows()),
            ));
        }
        Ok(Self {
            states,
            targets,
            gram: None,
            cross: None,
        })
    }

    pub fn solve(&mut self, ridge_beta: f64) -> Result<ReadoutWeights> {
        if ridge_beta < 0.0 || !ridge_beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge_beta must be finite and nonnegative, got {ridge_beta}"
            )));
        }
        let weights = if ridge_beta == 0.0 {
            self.solve_pinv()
        } else {
            self.solve_regularized(ridge_beta)
        };
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("readout solution"));
        }
        Ok(ReadoutWeights {
            weights,
            ridge_beta,
        })
    }

    fn solve_regularized(&mut self, ridge_beta: f64) -> DMatrix<f64> {
        let s = self.states.matrix();
        let y = self.targets.matrix();
        let gram = self.gram.get_or_insert_with(|| s * s.transpose());
        let cross = self.cross.get_or_insert_with(|| s * y.transpose());
        let mut a = gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += ridge_beta;
        }
        match a.clone().cholesky() {
            Some(ch) => ch.solve(cross).transpose(),
            // Rounding can break definiteness when beta is tiny next to the
            // gram diagonal.
            None => {
                let pinv = pseudo_inverse(a);
                (pinv * &*cross).transpose()
            }
        }
    }

    fn solve_pinv(&self) -> DMatrix<f64> {
        self.targets.matrix() * pseudo_inverse(self.states.matrix().clone())
    }
}

fn pseudo_inverse(m: DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = SVD_RELATIVE_CUTOFF * smax;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let inv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values
            .iter()
            .map(|&s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 }),
    );
    // V * diag(inv) * U^T
    let mut vs = v_t.transpose();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        col *= inv[j];
    }
    vs * u.transpose()
}

pub fn fit_ridge(
    states: &StateMatrix,
    targets: &TargetMatrix,
    ridge_beta: f64,
) -> Result<ReadoutWeights> {
    RidgeSystem::new(states, targets)?.solve(ridge_beta)
}

pub fn apply_readout(w: &ReadoutWeights, state: &[f64]) -> Result<Vec<f64>> {
    if state.len() != w.state_len() {
        return Err(Error::dims(
            format!("state of length {}", w.state_len()),
            format!("length {}", state.len()),
        ));
    }
    Ok(w.weights
        .row_iter()
        .map(|row| row.iter().zip(state).map(|(a, b)| a * b).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sm(m: DMatrix<f64>) -> StateMatrix {
        StateMatrix::new(m).unwrap()
    }

    fn tm(m: DMatrix<f64>) -> TargetMatrix {
        TargetMatrix::new(m).unwrap()
    }

    /// Gauss-Jordan inverse with partial pivoting on plain vectors.
    fn gj_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap())
                .unwrap();
            m.swap(c, p);
            let d = m[c][c];
            for v in m[c].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let pivot_row = m[c].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    /// `Y S^T (S S^T + beta I)^{-1}` evaluated with explicit loops.
    fn oracle(s: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64) -> Vec<Vec<f64>> {
        let (n, t) = s.shape();
        let o = y.nrows();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..t).map(|k| s[(i, k)] * s[(j, k)]).sum::<f64>()
                            + if i == j { beta } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let inv = gj_inverse(&a);
        let ys: Vec<Vec<f64>> = (0..o)
            .map(|r| {
                (0..n)
                    .map(|i| (0..t).map(|k| y[(r, k)] * s[(i, k)]).sum())
                    .collect()
            })
            .collect();
        ys.iter()
            .map(|row| {
                (0..n)
                    .map(|j| (0..n).map(|i| row[i] * inv[i][j]).sum())
                    .collect()
            })
            .collect()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let w = fit_ridge(&sm(i2.clone()), &tm(i2.clone()), 0.0).unwrap();
        assert!((w.weights.clone() - &i2).abs().max() < 1e-14);
        let w = fit_ridge(&sm(i2.clone()), &tm(i2.clone()), 1.0).unwrap();
        assert!((w.weights.clone() - i2 * 0.5).abs().max() < 1e-14);
        assert_eq!(w.ridge_beta, 1.0);
    }

    #[test]
    fn matches_explicit_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random(&mut rng, 3, 20);
        let y = random(&mut rng, 1, 20);
        let w = fit_ridge(&sm(s.clone()), &tm(y.clone()), 0.1).unwrap();
        let o = oracle(&s, &y, 0.1);
        for (j, e) in o[0].iter().enumerate() {
            assert!((w.weights[(0, j)] - e).abs() < 1e-8);
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let s = sm(DMatrix::zeros(2, 3));
        let y = tm(DMatrix::zeros(1, 4));
        assert!(matches!(
            fit_ridge(&s, &y, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(
            StateMatrix::new(bad),
            Err(Error::NonFiniteInput(_))
        ));
        let empty = sm(DMatrix::zeros(2, 0));
        assert!(fit_ridge(&empty, &tm(DMatrix::zeros(1, 0)), 1.0).is_err());
        assert!(fit_ridge(
            &sm(DMatrix::identity(2, 2)),
            &tm(DMatrix::identity(2, 2)),
            -1.0
        )
        .is_err());
    }

    #[test]
    fn zero_pad_rows_are_harmless() {
        // Rank-deficient states: the last row is identically zero.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = random(&mut rng, 4, 30);
        s.row_mut(3).fill(0.0);
        let y = random(&mut rng, 1, 30);
        for beta in [0.0, 1e-8, 1e-3] {
            let w = fit_ridge(&sm(s.clone()), &tm(y.clone()), beta).unwrap();
            assert!(w.weights[(0, 3)].abs() < 1e-12);
        }
    }

    #[test]
    fn apply_examples() {
        let w = ReadoutWeights {
            weights: DMatrix::identity(2, 2),
            ridge_beta: 0.0,
        };
        assert_eq!(apply_readout(&w, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let w = ReadoutWeights {
            weights: DMatrix::zeros(2, 3),
            ridge_beta: 0.0,
        };
        assert_eq!(
            apply_readout(&w, &[1.0, -2.0, 5.0]).unwrap(),
            vec![0.0, 0.0]
        );
        let w = ReadoutWeights {
            weights: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            ridge_beta: 0.0,
        };
        assert_eq!(apply_readout(&w, &[3.0, 4.0]).unwrap(), vec![11.0]);
        assert!(apply_readout(&w, &[1.0]).is_err());
    }

    #[test]
    fn json_is_row_major() {
        let w = ReadoutWeights {
            weights: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            ridge_beta: 0.5,
        };
        let j = serde_json::to_string(&w).unwrap();
        assert_eq!(
            j,
            r#"{"rows":2,"cols":2,"ridge_beta":0.5,"weights":[1.0,2.0,3.0,4.0]}"#
        );
        let back: ReadoutWeights = serde_json::from_str(&j).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<ReadoutWeights>(
            r#"{"rows":2,"cols":2,"ridge_beta":0.5,"weights":[1.0]}"#
        )
        .is_err());
    }

    #[test]
    fn shared_system_matches_single_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sm(random(&mut rng, 5, 40));
        let y = tm(random(&mut rng, 2, 40));
        let mut sys = RidgeSystem::new(&s, &y).unwrap();
        for beta in [1e-6, 0.1, 0.0, 3.0] {
            assert_eq!(sys.solve(beta).unwrap(), fit_ridge(&s, &y, beta).unwrap());
        }
    }

    #[test]
    fn residual_is_optimal_without_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random(&mut rng, 6, 40);
        let y = random(&mut rng, 1, 40);
        let w = fit_ridge(&sm(s.clone()), &tm(y.clone()), 0.0).unwrap();
        let resid = |w: &DMatrix<f64>| (&y - w * &s).norm_squared();
        let best = resid(&w.weights);
        for _ in 0..20 {
            let dir = random(&mut rng, 1, 6);
            let dir = dir.clone() / dir.norm() * 1e-3;
            assert!(best <= resid(&(&w.weights + &dir)));
            assert!(best <= resid(&(&w.weights - &dir)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn oracle_equivalence(seed in any::<u64>(), n in 1usize..=10, extra in 0usize..40, bi in 0usize..3) {
            let t = n + extra.max(1);
            let beta = [0.0, 0.1, 1.0][bi];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random(&mut rng, n, t);
            let y = random(&mut rng, 1, t);
            let w = fit_ridge(&sm(s.clone()), &tm(y.clone()), beta).unwrap();
            let o = oracle(&s, &y, beta);
            for (j, e) in o[0].iter().enumerate() {
                prop_assert!((w.weights[(0, j)] - e).abs() < 1e-8);
            }
        }

        #[test]
        fn shrinkage_is_monotone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sm(random(&mut rng, 5, 30));
            let y = tm(random(&mut rng, 1, 30));
            let mut sys = RidgeSystem::new(&s, &y).unwrap();
            let mut last = f64::INFINITY;
            for beta in [0.0, 1e-4, 1e-2, 1.0, 10.0, 1e3, 1e6, 1e12] {
                let norm = sys.solve(beta).unwrap().weights.norm();
                prop_assert!(norm <= last * (1.0 + 1e-9));
                last = norm;
            }
            prop_assert!(last < 1e-9);
        }
    }
}
