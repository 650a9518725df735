//! Marginal distributions and the equicorrelated Gaussian copula.

use std::f64::consts::SQRT_2;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Power law with `P[Z >= t] = t^-(1+delta)` on `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    delta: f64,
}

impl PowerLaw {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("must be a positive finite real, got {delta}")));
        }
        Ok(PowerLaw { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn tail_exponent(&self) -> f64 {
        1.0 + self.delta
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 1.0 {
            0.0
        } else {
            1.0 - self.survival(t)
        }
    }

    /// `P[Z >= t]`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else {
            t.powf(-self.tail_exponent())
        }
    }

    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::param("u", format!("must lie in [0, 1), got {u}")));
        }
        Ok(self.inv_survival(1.0 - u))
    }

    /// Value whose upper-tail mass is `s`; `s` in (0, 1].
    fn inv_survival(&self, s: f64) -> f64 {
        s.powf(-1.0 / self.tail_exponent())
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        // 1 - U lies in (0, 1], keeping the draw finite.
        let s: f64 = 1.0 - rng.random::<f64>();
        self.inv_survival(s)
    }

    /// The maximum of `m` i.i.d. draws, sampled in one step.
    ///
    /// With `V` uniform, `V^(1/m)` has the law of the largest of `m` uniforms;
    /// its upper-tail mass `1 - V^(1/m)` is formed with `expm1` so it stays
    /// accurate for large `m`.
    pub fn sample_max(&self, m: usize, rng: &mut Stream) -> Result<f64> {
        if m == 0 {
            return Err(Error::param("m", "need at least one draw"));
        }
        let v: f64 = rng.sample(Open01);
        let s = -(v.ln() / m as f64).exp_m1();
        Ok(self.inv_survival(s))
    }
}

/// Inverse CDF of the power law, `(1-u)^(-1/(1+delta))`.
pub fn power_law_inv_cdf(u: f64, delta: f64) -> Result<f64> {
    PowerLaw::new(delta)?.inv_cdf(u)
}

/// Normal distribution restricted to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    mean: f64,
    scale: f64,
    low: f64,
    high: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, scale: f64, low: f64, high: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param("scale", format!("must be positive, got {scale}")));
        }
        if low >= high || low.is_nan() || high.is_nan() {
            return Err(Error::param("low", format!("need low < high, got [{low}, {high}]")));
        }
        if !mean.is_finite() {
            return Err(Error::param("mean", "must be finite"));
        }
        let t = TruncatedNormal { mean, scale, low, high };
        if t.mass() <= 1e-12 {
            return Err(Error::param("low", "truncation window carries no probability mass"));
        }
        Ok(t)
    }

    /// Score distribution of the calibration study: mean 230, sd 25 on [200, 300].
    pub fn calibration_scores() -> Self {
        TruncatedNormal { mean: 230.0, scale: 25.0, low: 200.0, high: 300.0 }
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    fn std(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }

    fn mass(&self) -> f64 {
        std_normal_cdf(self.std(self.high)) - std_normal_cdf(self.std(self.low))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.low {
            0.0
        } else if x >= self.high {
            1.0
        } else {
            let lo = std_normal_cdf(self.std(self.low));
            ((std_normal_cdf(self.std(x)) - lo) / self.mass()).clamp(0.0, 1.0)
        }
    }

    /// Inverse CDF by bisection on the forward CDF.
    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::param("u", format!("must lie in [0, 1], got {u}")));
        }
        let (mut lo, mut hi) = (self.low, self.high);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Rejection sampling from the untruncated normal.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.scale * z;
            if (self.low..=self.high).contains(&x) {
                return x;
            }
        }
    }
}

/// A continuous marginal usable by the copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    PowerLaw(PowerLaw),
    TruncatedNormal(TruncatedNormal),
}

impl Marginal {
    pub fn power_law(delta: f64) -> Result<Self> {
        PowerLaw::new(delta).map(Marginal::PowerLaw)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::PowerLaw(p) => p.cdf(x),
            Marginal::TruncatedNormal(t) => t.cdf(x),
        }
    }

    pub fn inv_cdf(&self, u: f64) -> Result<f64> {
        match self {
            Marginal::PowerLaw(p) => p.inv_cdf(u),
            Marginal::TruncatedNormal(t) => t.inv_cdf(u),
        }
    }

    pub fn support_min(&self) -> f64 {
        match self {
            Marginal::PowerLaw(_) => 1.0,
            Marginal::TruncatedNormal(t) => t.low,
        }
    }

    /// `F^-1(Phi(z))`.
    ///
    /// The power law goes through the upper tail `Phi(-z)` so that large `z`
    /// keep full relative precision instead of collapsing at `1 - eps`.
    pub fn from_normal(&self, z: f64) -> f64 {
        match self {
            Marginal::PowerLaw(p) => {
                let s = std_normal_cdf(-z);
                if s > 0.0 {
                    p.inv_survival(s)
                } else {
                    f64::MAX
                }
            }
            Marginal::TruncatedNormal(t) => t
                .inv_cdf(std_normal_cdf(z))
                .expect("Phi maps into [0, 1]"),
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            Marginal::PowerLaw(p) => p.sample(rng),
            Marginal::TruncatedNormal(t) => t.sample(rng),
        }
    }
}

/// Equicorrelation structure `(1-sigma) I + sigma 11^T` over `dims` attributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    sigma: f64,
    dims: usize,
}

impl CorrelationSpec {
    pub fn new(sigma: f64, dims: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::param("sigma", format!("must lie in [0, 1], got {sigma}")));
        }
        if dims == 0 {
            return Err(Error::param("d", "need at least one attribute"));
        }
        Ok(CorrelationSpec { sigma, dims })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// One latent normal vector via the one-factor form
    /// `z_j = sqrt(sigma) w + sqrt(1 - sigma) e_j`.
    fn fill_latent(&self, rng: &mut Stream, out: &mut [f64]) {
        if self.sigma == 1.0 {
            let w: f64 = rng.sample(StandardNormal);
            out.fill(w);
        } else if self.sigma == 0.0 {
            for z in out.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
        } else {
            let common = self.sigma.sqrt();
            let own = (1.0 - self.sigma).sqrt();
            let w: f64 = rng.sample(StandardNormal);
            for z in out.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *z = common * w + own * e;
            }
        }
    }
}

/// Draws an `n x d` matrix whose rows are i.i.d. Gaussian-copula vectors with
/// equicorrelation `sigma` and the given marginal.
pub fn sample_correlated_matrix(
    n: usize,
    d: usize,
    sigma: f64,
    marginal: &Marginal,
    rng: &mut Stream,
) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::param("n", "need at least one applicant"));
    }
    let spec = CorrelationSpec::new(sigma, d)?;
    let mut values = Array2::<f64>::zeros((n, d));
    let mut latent = vec![0.0; d];
    for mut row in values.rows_mut() {
        spec.fill_latent(rng, &mut latent);
        if sigma == 1.0 {
            // identical latent coordinates: transform once
            row.fill(marginal.from_normal(latent[0]));
        } else {
            for (x, &z) in row.iter_mut().zip(&latent) {
                *x = marginal.from_normal(z);
            }
        }
    }
    Ok(values)
}
