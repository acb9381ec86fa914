use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
    /// Set when the reference distribution's parameters were estimated from
    /// the same sample, which makes the asymptotic p-value conservative.
    pub parameters_estimated: bool,
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > lambda) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // the alternating series converges slowly here; use the theta-function
        // form of the CDF instead
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let w = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * pi2 / (8.0 * lambda * lambda)).exp();
        }
        return (1.0 - w * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("KS input holds non-finite values".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample statistic `sup_t |F_x(t) - F_y(t)|` by a merged sweep.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Argument("KS test needs two nonempty samples".into()));
    }
    let (x, y) = (sorted(x)?, sorted(y)?);
    let (nx, ny) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < nx && j < ny {
        let t = x[i].min(y[j]);
        while i < nx && x[i] <= t {
            i += 1;
        }
        while j < ny && y[j] <= t {
            j += 1;
        }
        // compare cross-multiplied counts to avoid rounding in the sup
        let diff = (i * ny).abs_diff(j * nx);
        d = d.max(diff as f64 / (nx * ny) as f64);
    }
    Ok(d)
}

/// Two-sided two-sample test with the asymptotic p-value at effective size
/// `nx * ny / (nx + ny)`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    let d = ks_statistic(x, y)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let en = (nx * ny / (nx + ny)).sqrt();
    Ok(KsResult {
        d,
        p: kolmogorov_sf(en * d),
        parameters_estimated: false,
    })
}

/// One-sample test against a normal with the sample's own mean and standard
/// deviation.
pub fn ks_normality(x: &[f64]) -> Result<KsResult> {
    if x.len() < 3 {
        return Err(Error::Argument("normality test needs at least 3 values".into()));
    }
    let s = sorted(x)?;
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::Degenerate("zero variance sample".into()));
    }
    let normal = Normal::new(mean, var.sqrt())
        .map_err(|e| Error::Degenerate(format!("reference normal: {e}")))?;
    let mut d = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let f = normal.cdf(v);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(KsResult {
        d,
        p: kolmogorov_sf(n.sqrt() * d),
        parameters_estimated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_zero_distance() {
        let r = ks_two_sample(&[3.0, 1.0, 2.0, 2.0], &[2.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.d, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn disjoint_supports_have_unit_distance() {
        let r = ks_two_sample(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(r.d, 1.0);
    }

    #[test]
    fn shifted_triplets() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn kolmogorov_tail_matches_reference_values() {
        // reference: scipy.special.kolmogorov
        approx::assert_abs_diff_eq!(kolmogorov_sf(1.0), 0.26999967167735456, epsilon = 1e-10);
        approx::assert_abs_diff_eq!(kolmogorov_sf(0.5), 0.9639452436648751, epsilon = 1e-10);
        approx::assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.049485876755377876, epsilon = 1e-10);
        approx::assert_abs_diff_eq!(kolmogorov_sf(2.0), 0.0006709252557796953, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(kolmogorov_sf(0.2), 0.999999999999495, epsilon = 1e-12);
        // the two series agree at the switch point
        let (a, b) = (kolmogorov_sf(1.18 - 1e-12), kolmogorov_sf(1.18));
        approx::assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn normality_flags_estimated_parameters_and_degeneracy() {
        let r = ks_normality(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(r.parameters_estimated);
        assert!(matches!(ks_normality(&[2.0; 10]), Err(Error::Degenerate(_))));
        assert!(ks_normality(&[1.0, 2.0]).is_err());
    }
}
