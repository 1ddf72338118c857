use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgrcConfig {
    /// Lags beyond the current sample.
    pub delay: usize,
    #[serde(default = "super::default_ridge_beta")]
    pub ridge_beta: f64,
}

impl NgrcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay == 0 {
            return Err(Error::InvalidConfig(
                "ngrc: delay must be at least 1".into(),
            ));
        }
        if !(self.ridge_beta >= 0.0 && self.ridge_beta.is_finite()) {
            return Err(Error::InvalidConfig(
                "ngrc: ridge_beta must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        feature_len(self.delay)
    }
}

/// `(d+1)` linear terms, `(d+1)` squares and `(d+1)d/2` cross terms.
pub fn feature_len(delay: usize) -> usize {
    let k = delay + 1;
    2 * k + k * delay / 2
}

/// Linear block, squares, then the strict upper triangle of the outer product
/// in row-major order. The window is newest first.
pub fn ngrc_features(window: &[f64]) -> Result<Vec<f64>> {
    if window.len() < 2 {
        return Err(Error::WindowTooShort {
            needed: 2,
            actual: window.len(),
        });
    }
    let k = window.len();
    let mut out = Vec::with_capacity(feature_len(k - 1));
    out.extend_from_slice(window);
    out.extend(window.iter().map(|x| x * x));
    for i in 0..k {
        for j in i + 1..k {
            out.push(window[i] * window[j]);
        }
    }
    Ok(out)
}

/// The NG-RC state: the feature vector under an identity activation.
pub fn ngrc_state(window: &[f64]) -> Result<Vec<f64>> {
    ngrc_features(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            ngrc_features(&[1.0, 2.0]).unwrap(),
            vec![1.0, 2.0, 1.0, 4.0, 2.0]
        );
        assert_eq!(ngrc_features(&[0.0, 0.0]).unwrap(), vec![0.0; 5]);
        assert_eq!(ngrc_features(&[1.0, 2.0, 3.0]).unwrap().len(), 9);
        assert_eq!(
            ngrc_state(&[-1.0, 1.0]).unwrap(),
            vec![-1.0, 1.0, 1.0, 1.0, -1.0]
        );
        assert!(matches!(
            ngrc_features(&[1.0]),
            Err(Error::WindowTooShort { .. })
        ));
        assert!(NgrcConfig {
            delay: 0,
            ridge_beta: 0.0
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn length_formula(d in 1usize..=50) {
            let w: Vec<f64> = (0..=d).map(|i| i as f64 * 0.1).collect();
            prop_assert_eq!(ngrc_features(&w).unwrap().len(), (d + 1) + (d + 1) + (d + 1) * d / 2);
        }

        #[test]
        fn polynomial_scaling(w in prop::collection::vec(-2f64..2., 2..12), c in -3f64..3.) {
            let k = w.len();
            let base = ngrc_features(&w).unwrap();
            let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
            let f = ngrc_features(&scaled).unwrap();
            for (i, (a, b)) in f.iter().zip(&base).enumerate() {
                let expect = if i < k { b * c } else { b * c * c };
                prop_assert!((a - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }

        #[test]
        fn state_equals_features(w in prop::collection::vec(-2f64..2., 2..12)) {
            prop_assert_eq!(ngrc_state(&w).unwrap(), ngrc_features(&w).unwrap());
        }
    }
}
