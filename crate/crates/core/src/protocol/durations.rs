use crate::error::{Error, Result};

use super::schedule::STEPS;

/// Floor for the fast steps 1 and 4.
pub const FAST_STEP: f64 = 3e-9;
pub const DEFAULT_MARGIN: f64 = 10.0;

/// Adiabatic lower bounds on the slow steps, without margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationBounds {
    /// `max_n 4 kappa / (chi (n-1))^2`
    pub dt2: f64,
    /// `max_n chi (n-1) / (2 kappa^2)`
    pub dt3: f64,
    /// `5 / kappa`
    pub dt5: f64,
    /// `10 / chi`
    pub dt6: f64,
}

fn check_rates(chi_max: f64, kappa_max: f64) -> Result<()> {
    if !(chi_max > 0.0 && chi_max.is_finite() && kappa_max > 0.0 && kappa_max.is_finite()) {
        return Err(Error::domain(format!(
            "duration bounds need positive chi_max and kappa_max, got {chi_max}, {kappa_max}"
        )));
    }
    Ok(())
}

pub fn duration_bounds(chi_max: f64, kappa_max: f64, n_min: u32, n_max: u32) -> Result<DurationBounds> {
    check_rates(chi_max, kappa_max)?;
    if n_min < 2 || n_max < n_min {
        return Err(Error::config(format!(
            "quanta range [{n_min}, {n_max}] is empty or includes n < 2"
        )));
    }
    let mut dt2 = 0.0f64;
    let mut dt3 = 0.0f64;
    for n in n_min..=n_max {
        let x = chi_max * (n - 1) as f64;
        dt2 = dt2.max(4.0 * kappa_max / (x * x));
        dt3 = dt3.max(x / (2.0 * kappa_max * kappa_max));
    }
    Ok(DurationBounds {
        dt2,
        dt3,
        dt5: 5.0 / kappa_max,
        dt6: 10.0 / chi_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendedDurations {
    /// Steps 1 to 6; step 7 is left to calibration.
    pub steps: [f64; 6],
    pub raw: DurationBounds,
    pub margin: f64,
}

impl RecommendedDurations {
    pub fn with_dt7(&self, dt7: f64) -> [f64; STEPS] {
        let mut out = [dt7; STEPS];
        out[..6].copy_from_slice(&self.steps);
        out
    }

    /// Steps 1 to 6 scaled uniformly so that together with `dt7` they last `total`.
    pub fn rescaled(&self, total: f64, dt7: f64) -> Result<[f64; STEPS]> {
        let sum: f64 = self.steps.iter().sum();
        if !(total > dt7 && dt7 > 0.0) {
            return Err(Error::config(format!("total time {total} does not leave room for dt7 = {dt7}")));
        }
        let s = (total - dt7) / sum;
        let mut out = [dt7; STEPS];
        for (o, d) in out.iter_mut().zip(&self.steps) {
            *o = d * s;
        }
        Ok(out)
    }
}

/// Margin-scaled bounds with the pairings `dt2 = dt6` and `dt3 = dt5` enforced.
pub fn recommend_durations(chi_max: f64, kappa_max: f64, n_range: (u32, u32), margin: f64) -> Result<RecommendedDurations> {
    recommend_durations_with_floor(chi_max, kappa_max, n_range, margin, FAST_STEP)
}

pub fn recommend_durations_with_floor(
    chi_max: f64,
    kappa_max: f64,
    n_range: (u32, u32),
    margin: f64,
    fast: f64,
) -> Result<RecommendedDurations> {
    if !(margin >= 1.0 && margin.is_finite()) {
        return Err(Error::config(format!("margin must be at least 1, got {margin}")));
    }
    if !(fast > 0.0 && fast.is_finite()) {
        return Err(Error::config(format!("fast step must be positive, got {fast}")));
    }
    let raw = duration_bounds(chi_max, kappa_max, n_range.0, n_range.1)?;
    let a = margin * raw.dt2.max(raw.dt6);
    let b = margin * raw.dt3.max(raw.dt5);
    Ok(RecommendedDurations {
        steps: [fast, a, b, fast, b, a],
        raw,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhz;
    use proptest::prelude::*;

    #[test]
    fn raw_bounds_reference_values() {
        let (chi, kappa) = (mhz(100.0), mhz(30.0));
        let b = duration_bounds(chi, kappa, 2, 3).unwrap();
        // 4 * 30e6 / (2 pi (100e6)^2)
        let dt2 = 4.0 * 30e6 / (crate::TWO_PI * 1e16);
        assert!((b.dt2 - dt2).abs() / dt2 < 1e-14);
        assert!((b.dt2 - 1.91e-9).abs() < 0.01e-9);
        assert!((b.dt5 - 26.5e-9).abs() < 0.05e-9);
        assert!((b.dt6 - 15.9e-9).abs() < 0.05e-9);
        // chi (n-1) / (2 kappa^2) at n = 3
        let dt3 = 2.0 * 100e6 / (2.0 * crate::TWO_PI * 900e12);
        assert!((b.dt3 - dt3).abs() / dt3 < 1e-14);
    }

    #[test]
    fn pairings_and_floor() {
        let r = recommend_durations(mhz(100.0), mhz(30.0), (2, 3), 10.0).unwrap();
        let s = r.steps;
        assert_eq!(s[0], FAST_STEP);
        assert_eq!(s[3], FAST_STEP);
        assert_eq!(s[1], s[5]);
        assert_eq!(s[2], s[4]);
        assert!((s[1] - 159.15e-9).abs() < 0.1e-9);
        assert!((s[2] - 265.26e-9).abs() < 0.1e-9);
        let full = r.rescaled(106.4e-9, 16.0e-9).unwrap();
        assert!((full.iter().sum::<f64>() - 106.4e-9).abs() < 1e-20);
        assert_eq!(full[6], 16.0e-9);
        assert_eq!(r.with_dt7(5e-9)[6], 5e-9);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(recommend_durations(1.0, 1.0, (3, 2), 10.0), Err(Error::Config(_))));
        assert!(matches!(recommend_durations(1.0, 1.0, (1, 2), 10.0), Err(Error::Config(_))));
        assert!(recommend_durations(1.0, 1.0, (2, 2), 0.5).is_err());
        assert!(recommend_durations(0.0, 1.0, (2, 2), 10.0).is_err());
    }

    proptest! {
        #[test]
        fn bounds_scale_with_margin(m in 1.0f64..50.0, chi in 1e7f64..1e9, kappa in 1e7f64..1e9) {
            let one = recommend_durations(chi, kappa, (2, 4), 1.0).unwrap();
            let r = recommend_durations(chi, kappa, (2, 4), m).unwrap();
            for k in [1, 2, 4, 5] {
                prop_assert!((r.steps[k] - m * one.steps[k]).abs() <= 1e-12 * r.steps[k]);
            }
            prop_assert!(r.steps[1] >= m * r.raw.dt2 && r.steps[1] >= m * r.raw.dt6);
            prop_assert!(r.steps[2] >= m * r.raw.dt3 && r.steps[2] >= m * r.raw.dt5);
        }
    }
}
