use crate::error::{Error, Result};
use crate::mixing::Variant;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Step size that yields the convergence rate of the variant:
///
/// * oracle: `min{ sqrt(n D0 / (T L sigma^2)), cbrt(D0 / (100 T c L^2 (sigma^2 + H^2))), 1/(20L) }`
/// * local: `min{ sqrt(n D0 / (T (211 sigma^2 + 332 c H^2) L)), cbrt(D0 / (250 T c L^2 (sigma^2 + H^2))), 1/(20L) }`
///
/// with `c` the contraction factor of the variant at `(n, s)`. A term whose
/// denominator vanishes does not constrain the minimum.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_stepsize(
    variant: Variant,
    n: usize,
    s: usize,
    rounds: u64,
    smoothness: f64,
    sigma: f64,
    heterogeneity: f64,
    delta0: f64,
) -> Result<f64> {
    let c = variant.contraction(n, s)?;
    if rounds == 0 {
        return Err(Error::param("T", "need at least one round"));
    }
    positive("L", smoothness)?;
    positive("Delta0", delta0)?;
    non_negative("sigma", sigma)?;
    non_negative("H", heterogeneity)?;
    let (t, nf, l) = (rounds as f64, n as f64, smoothness);
    let (s2, h2) = (sigma * sigma, heterogeneity * heterogeneity);
    let (noise, drift_const) = match variant {
        Variant::Oracle => (s2, 100.0),
        Variant::Local => (211.0 * s2 + 332.0 * c * h2, 250.0),
    };
    if noise <= 0.0 {
        return Err(Error::param(
            "sigma",
            match variant {
                Variant::Oracle => "sigma must be positive".to_string(),
                Variant::Local => "sigma^2 + alpha H^2 must be positive".to_string(),
            },
        ));
    }
    let first = (nf * delta0 / (t * noise * l)).sqrt();
    let drift_den = drift_const * t * c * l * l * (s2 + h2);
    let second = if drift_den > 0.0 { (delta0 / drift_den).cbrt() } else { f64::INFINITY };
    Ok(first.min(second).min(1.0 / (20.0 * l)))
}

/// Ceiling on the expected consensus distance for step sizes up to
/// `1/(20L)`: `20 (1 + 3c) / (1 - c)^2 * c * gamma^2 * (sigma^2 + H^2)`.
pub fn drift_bound(c: f64, gamma: f64, sigma: f64, heterogeneity: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::param("c", format!("contraction factor must lie in [0, 1), got {c}")));
    }
    positive("gamma", gamma)?;
    non_negative("sigma", sigma)?;
    non_negative("H", heterogeneity)?;
    Ok(20.0 * (1.0 + 3.0 * c) / (1.0 - c).powi(2) * c * gamma * gamma * (sigma * sigma + heterogeneity * heterogeneity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::{alpha_local, lambda_oracle};

    #[test]
    fn huge_smoothness_picks_third_term() {
        let g = theoretical_stepsize(Variant::Oracle, 32, 4, 1000, 1e8, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(g, 1.0 / (20.0 * 1e8));
    }

    #[test]
    fn huge_noise_picks_first_term() {
        let (n, t, l, d0) = (32.0, 1000.0, 1.0, 1.0);
        let sigma = 1e6;
        let g = theoretical_stepsize(Variant::Oracle, 32, 4, 1000, l, sigma, 1.0, d0).unwrap();
        assert_eq!(g, (n * d0 / (t * l * sigma * sigma)).sqrt());
        assert!(g < 1e-6);
    }

    #[test]
    fn local_constants() {
        let (n, s, t) = (32usize, 4usize, 10_000u64);
        let c = alpha_local(n, s).unwrap();
        let (l, sigma, h, d0) = (2.0, 0.5, 3.0, 7.0);
        let a = (n as f64 * d0 / (t as f64 * (211.0 * 0.25 + 332.0 * c * 9.0) * l)).sqrt();
        let b = (d0 / (250.0 * t as f64 * c * l * l * (0.25 + 9.0))).cbrt();
        let expected = a.min(b).min(1.0 / 40.0);
        assert_eq!(theoretical_stepsize(Variant::Local, n, s, t, l, sigma, h, d0).unwrap(), expected);
    }

    #[test]
    fn invalid_inputs() {
        assert!(theoretical_stepsize(Variant::Oracle, 32, 4, 10, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_stepsize(Variant::Oracle, 32, 4, 10, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(theoretical_stepsize(Variant::Local, 32, 4, 10, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(theoretical_stepsize(Variant::Local, 32, 4, 10, 1.0, 0.0, 1.0, 1.0).is_ok());
        assert!(theoretical_stepsize(Variant::Oracle, 32, 4, 0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_stepsize(Variant::Oracle, 32, 40, 10, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn drift_bound_values() {
        assert_eq!(drift_bound(0.0, 0.1, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(drift_bound(0.3, 0.1, 0.0, 0.0).unwrap(), 0.0);
        assert!(drift_bound(1.0, 0.1, 1.0, 1.0).is_err());
        assert!(drift_bound(0.5, 0.0, 1.0, 1.0).is_err());
        let c = alpha_local(8, 2).unwrap();
        let by_hand = 20.0 * (1.0 + 3.0 * c) / ((1.0 - c) * (1.0 - c)) * c * 1e-4 * 2.0;
        assert!((drift_bound(c, 0.01, 1.0, 1.0).unwrap() - by_hand).abs() < 1e-15);
        let lam = lambda_oracle(8, 2).unwrap();
        assert!(drift_bound(lam, 0.01, 1.0, 1.0).unwrap() < drift_bound(c, 0.01, 1.0, 1.0).unwrap());
    }
}
