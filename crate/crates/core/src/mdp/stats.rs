use crate::error::{Error, Result};
use crate::mdp::model::{check_distribution, ROW_SUM_TOL};

/// Variance of `v` under the probability vector `dist`:
/// `dist . (v o v) - (dist . v)^2`.
pub fn variance_under(dist: &[f64], v: &[f64]) -> Result<f64> {
    if dist.len() != v.len() {
        return Err(Error::invalid("distribution and vector lengths differ"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("value vector has non-finite entries"));
    }
    check_distribution(dist, ROW_SUM_TOL, "distribution")?;
    let mean: f64 = dist.iter().zip(v).map(|(p, x)| p * x).sum();
    let second: f64 = dist.iter().zip(v).map(|(p, x)| p * x * x).sum();
    Ok((second - mean * mean).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_symmetric() {
        assert_eq!(variance_under(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.25);
    }

    #[test]
    fn constant_vector_has_zero_variance() {
        for c in [-3.0, 0.0, 2.5, 1e6] {
            assert_eq!(variance_under(&[0.3, 0.7], &[c, c]).unwrap(), 0.0);
        }
    }

    #[test]
    fn asymmetric_two_point() {
        // E = 2.4, E[V^2] = 6.6
        let v = variance_under(&[0.3, 0.7], &[1.0, 3.0]).unwrap();
        assert!((v - 0.84).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(variance_under(&[0.3, 0.6], &[1.0, 3.0]).is_err());
        assert!(variance_under(&[0.5], &[1.0, 3.0]).is_err());
    }
}
