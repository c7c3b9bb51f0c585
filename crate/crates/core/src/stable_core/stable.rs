use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Symmetric stable law with CF `exp(-scale^index |theta|^index)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    pub index: f64,
    pub scale: f64,
}

impl StableLaw {
    pub fn new(index: f64, scale: f64) -> Result<Self> {
        let law = Self { index, scale };
        law.validate()?;
        Ok(law)
    }

    pub fn unit(index: f64) -> Result<Self> {
        Self::new(index, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.index > 0.0 && self.index <= 2.0) {
            return param_err(format!("stable index must be in (0, 2], got {}", self.index));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return param_err(format!("stable scale must be finite and >= 0, got {}", self.scale));
        }
        Ok(())
    }

    pub fn cf(&self, theta: f64) -> f64 {
        (-(self.scale * theta.abs()).powf(self.index)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * unit_sas(self.index, rng)
    }
}

/// One unit-scale SαS draw (Chambers-Mallows-Stuck, symmetric case).
///
/// `index` must lie in (0, 2]; callers validate.
#[inline]
pub fn unit_sas<R: Rng + ?Sized>(index: f64, rng: &mut R) -> f64 {
    if index == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        return SQRT_2 * z;
    }
    // V uniform on the open interval (-pi/2, pi/2).
    let v = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break PI * (u - 0.5);
        }
    };
    if index == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let cos_v = v.cos();
    (index * v).sin() / cos_v.powf(1.0 / index)
        * (((1.0 - index) * v).cos() / w).powf((1.0 - index) / index)
}

/// `count` i.i.d. draws from `law`.
pub fn sample_sas<R: Rng + ?Sized>(law: &StableLaw, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    law.validate()?;
    Ok((0..count).map(|_| law.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_and_se;
    use crate::rng::StreamKey;

    fn ecf(xs: &[f64], theta: f64) -> (f64, f64) {
        let c: Vec<f64> = xs.iter().map(|x| (theta * x).cos()).collect();
        mean_and_se(&c)
    }

    #[test]
    fn gaussian_branch_variance_two() {
        let mut rng = StreamKey::root(1).tag("sas").stream();
        let xs = sample_sas(&StableLaw::unit(2.0).unwrap(), 1_000_000, &mut rng).unwrap();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (var, se) = mean_and_se(&sq);
        assert!((var - 2.0).abs() < 3.0 * se, "var {var} se {se}");
    }

    #[test]
    fn cauchy_half_mass_in_unit_interval() {
        let mut rng = StreamKey::root(2).tag("sas").stream();
        let n = 200_000;
        let xs = sample_sas(&StableLaw::unit(1.0).unwrap(), n, &mut rng).unwrap();
        let frac = xs.iter().filter(|x| x.abs() <= 1.0).count() as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "{frac}");
    }

    #[test]
    fn cf_matches_closed_form_index_07() {
        let mut rng = StreamKey::root(3).tag("sas").stream();
        let xs = sample_sas(&StableLaw::unit(0.7).unwrap(), 1_000_000, &mut rng).unwrap();
        for theta in [0.5, 1.0, 2.0] {
            let (re, se) = ecf(&xs, theta);
            let exact = (-theta.powf(0.7)).exp();
            assert!((re - exact).abs() < 3.0 * se, "theta {theta}: {re} vs {exact} (se {se})");
        }
    }

    #[test]
    fn cf_matches_closed_form_index_15() {
        let mut rng = StreamKey::root(4).tag("sas").stream();
        let law = StableLaw::new(1.5, 0.8).unwrap();
        let xs = sample_sas(&law, 400_000, &mut rng).unwrap();
        for theta in [0.5, 1.0, 2.0] {
            let (re, se) = ecf(&xs, theta);
            assert!((re - law.cf(theta)).abs() < 3.0 * se);
        }
    }

    #[test]
    fn scale_equivariance_exact() {
        let key = StreamKey::root(5).tag("sas");
        for index in [0.5, 1.0, 1.3, 2.0] {
            let unit = sample_sas(&StableLaw::unit(index).unwrap(), 1000, &mut key.stream()).unwrap();
            let scaled =
                sample_sas(&StableLaw::new(index, 3.7).unwrap(), 1000, &mut key.stream()).unwrap();
            for (u, s) in unit.iter().zip(&scaled) {
                assert_eq!(*s, 3.7 * u);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = StreamKey::root(0).stream();
        assert!(sample_sas(&StableLaw { index: 2.5, scale: 1.0 }, 1, &mut rng).is_err());
        assert!(sample_sas(&StableLaw { index: 0.0, scale: 1.0 }, 1, &mut rng).is_err());
        assert!(sample_sas(&StableLaw { index: 1.0, scale: -1.0 }, 1, &mut rng).is_err());
        assert!(sample_sas(&StableLaw { index: 1.0, scale: 1.0 }, 0, &mut rng).unwrap().is_empty());
    }
}
