//! Standard normal density and distribution function.

use libm::erfc;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

pub fn cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14, "{}", cdf(1.0));
        assert!((cdf(-1.0) + cdf(1.0) - 1.0).abs() < 1e-15);
        // upper tail keeps relative accuracy
        assert!((cdf(-10.0) / 7.619_853_024_160_47e-24 - 1.0).abs() < 1e-10);
    }
}
