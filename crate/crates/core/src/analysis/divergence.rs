use crate::error::{Error, Result};

fn check(p: f64, q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::invalid("Bernoulli parameters must lie in [0,1]"))
    }
}

fn xlogy(x: f64, ratio_num: f64, ratio_den: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if ratio_den == 0.0 {
        f64::INFINITY
    } else {
        x * (ratio_num / ratio_den).ln()
    }
}

/// `KL(Ber(p) || Ber(q))` with `0 ln 0 = 0`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    check(p, q)?;
    Ok(xlogy(p, p, q) + xlogy(1.0 - p, 1.0 - p, 1.0 - q))
}

/// `chi^2(Ber(p) || Ber(q)) = (p-q)^2/q + (p-q)^2/(1-q)`.
pub fn chi2_bernoulli(p: f64, q: f64) -> Result<f64> {
    check(p, q)?;
    let d2 = (p - q) * (p - q);
    let term = |den: f64| {
        if d2 == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            d2 / den
        }
    };
    Ok(term(q) + term(1.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        assert!((kl_bernoulli(1.0, 0.2).unwrap() + 0.2f64.ln()).abs() < 1e-15);
        let direct = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl_bernoulli(0.75, 0.5).unwrap() - direct).abs() < 1e-15);
        assert!((kl_bernoulli(0.75, 0.5).unwrap() - 0.130812).abs() < 1e-6);
        assert!(kl_bernoulli(0.5, 0.0).unwrap().is_infinite());
        assert!((chi2_bernoulli(0.75, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(kl_bernoulli(1.2, 0.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn kl_below_chi2(p in 0.01f64..0.99, q in 0.01f64..0.99) {
            proptest::prop_assert!(kl_bernoulli(p, q).unwrap() <= chi2_bernoulli(p, q).unwrap() + 1e-12);
        }
    }
}
