//! Float helpers routed through `libm` so results are identical with and
//! without `std`.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

/// Hyperbolic tangent for the network activations. Built on
/// [`exp_nonpositive`]; absolute error stays within a few ulp of 1.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        return x * (1.0 - x * x / 3.0);
    }
    if a > 20.0 {
        return 1f64.copysign(x);
    }
    let e = exp_nonpositive(-2.0 * a);
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// `e^x` for `x <= 0`: Cody-Waite reduction by ln 2 and a degree-13
/// Taylor polynomial on `|r| <= ln2 / 2`. Within 2 ulp of `libm::exp`,
/// several times faster, and free of table lookups.
#[inline]
pub fn exp_nonpositive(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const ROUND: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const C: [f64; 14] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    debug_assert!(x <= 0.0 || x.is_nan());
    if x < -708.0 {
        return 0.0;
    }
    let k = (x * core::f64::consts::LOG2_E + ROUND) - ROUND;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = C[13];
    for c in C[..13].iter().rev() {
        p = p * r + c;
    }
    p * f64::from_bits(((k as i64 + 1023) as u64) << 52)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp_nonpositive(-x))
    } else {
        let e = exp_nonpositive(x);
        e / (1.0 + e)
    }
}

/// `x` wrapped into `[-pi, pi)`.
pub fn wrap_pi(x: f64) -> f64 {
    use core::f64::consts::PI;
    let t = libm::fmod(x + PI, 2.0 * PI);
    if t < 0.0 {
        t + PI
    } else {
        t - PI
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_libm() {
        for i in 0..200_000 {
            let x = -(i as f64) * 3.5e-3;
            let (a, b) = (exp_nonpositive(x), libm::exp(x));
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b, "{x}: {a} vs {b}");
        }
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert_eq!(exp_nonpositive(-800.0), 0.0);
    }

    #[test]
    fn tanh_matches_libm() {
        for i in 0..400_000 {
            let x = (i as f64) * 1e-4 - 20.0;
            assert!((tanh(x) - libm::tanh(x)).abs() <= 4.0 * f64::EPSILON, "{x}");
        }
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(-50.0), -1.0);
        assert!((sigmoid(0.3) - 1.0 / (1.0 + libm::exp(-0.3))).abs() < 1e-15);
    }
}
