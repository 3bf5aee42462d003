//! Werner-pair fidelity algebra.
//!
//! Link state is the scalar fidelity of a Werner pair. Swapping two Werner
//! pairs yields another Werner pair whose Werner parameter `w = (4F - 1) / 3`
//! is the product of the inputs', so chains reduce to products; the
//! [`oracle`] submodule checks this against an explicit 16x16 density-matrix
//! simulation of the Bell measurement.

pub mod oracle;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Fidelity of a Werner pair, clamped to `[1/4, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WernerFidelity(f64);

impl WernerFidelity {
    pub const MIXED: WernerFidelity = WernerFidelity(0.25);
    pub const PERFECT: WernerFidelity = WernerFidelity(1.0);

    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Self::MIXED;
        }
        Self(value.clamp(0.25, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Werner parameter `w = (4F - 1) / 3`, in `[0, 1]`.
    pub fn werner_parameter(self) -> f64 {
        (4.0 * self.0 - 1.0) / 3.0
    }

    pub fn from_werner_parameter(w: f64) -> Self {
        Self::new((1.0 + 3.0 * w) / 4.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumError {
    EmptyPath,
    QualityCount { expected: usize, got: usize },
    InvalidDecay(&'static str),
    /// Oracle state failed a physicality check.
    NotPhysical(&'static str),
}

impl fmt::Display for QuantumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantumError::EmptyPath => write!(f, "path has no links"),
            QuantumError::QualityCount { expected, got } => {
                write!(f, "expected {expected} repeater qualities, got {got}")
            }
            QuantumError::InvalidDecay(msg) => write!(f, "invalid decay parameters: {msg}"),
            QuantumError::NotPhysical(msg) => write!(f, "density matrix not physical: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for QuantumError {}

/// Stretched-exponential memory decoherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub f_initial: f64,
    pub f_background: f64,
    pub coherence_time_s: f64,
    pub stretch_exponent: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self { f_initial: 0.98, f_background: 0.25, coherence_time_s: 1.0, stretch_exponent: 1.0 }
    }
}

impl DecayParams {
    pub fn validate(&self) -> Result<(), QuantumError> {
        if !(self.f_initial <= 1.0 && self.f_initial >= self.f_background && self.f_background >= 0.25) {
            return Err(QuantumError::InvalidDecay("need 1 >= f_initial >= f_background >= 0.25"));
        }
        if !(self.coherence_time_s > 0.0) || !(self.stretch_exponent > 0.0) {
            return Err(QuantumError::InvalidDecay("coherence time and exponent must be positive"));
        }
        Ok(())
    }
}

/// Fidelity after `elapsed_s` in memory.
pub fn decay_fidelity(d: &DecayParams, elapsed_s: f64) -> WernerFidelity {
    let t = elapsed_s.max(0.0) / d.coherence_time_s;
    let envelope = math::exp(-math::powf(t, d.stretch_exponent));
    WernerFidelity::new((d.f_initial - d.f_background) * envelope + d.f_background)
}

/// Time until a fresh pair decays to `target` (`None` if it never does).
pub fn time_to_fidelity(d: &DecayParams, target: f64) -> Option<f64> {
    if target <= d.f_background {
        return None;
    }
    if target >= d.f_initial {
        return Some(0.0);
    }
    let ratio = (target - d.f_background) / (d.f_initial - d.f_background);
    Some(d.coherence_time_s * math::powf(-math::ln(ratio), 1.0 / d.stretch_exponent))
}

/// Ideal Werner swap followed by depolarization with `repeater_quality`.
pub fn swap_fidelity(f1: WernerFidelity, f2: WernerFidelity, repeater_quality: f64) -> WernerFidelity {
    let q = repeater_quality.clamp(0.0, 1.0);
    WernerFidelity::from_werner_parameter(q * f1.werner_parameter() * f2.werner_parameter())
}

/// Right fold of [`swap_fidelity`] along a path of elementary links.
///
/// `repeater_qualities[i]` belongs to the node joining link `i` and link `i + 1`.
pub fn end_to_end_fidelity(
    path_fidelities: &[WernerFidelity],
    repeater_qualities: &[f64],
) -> Result<WernerFidelity, QuantumError> {
    let (last, rest) = path_fidelities.split_last().ok_or(QuantumError::EmptyPath)?;
    if repeater_qualities.len() != rest.len() {
        return Err(QuantumError::QualityCount { expected: rest.len(), got: repeater_qualities.len() });
    }
    Ok(rest
        .iter()
        .zip(repeater_qualities)
        .rev()
        .fold(*last, |acc, (f, q)| swap_fidelity(*f, acc, *q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(x: f64) -> WernerFidelity {
        WernerFidelity::new(x)
    }

    #[test]
    fn decay_examples() {
        let d = DecayParams { f_initial: 1.0, f_background: 0.25, coherence_time_s: 2.0, stretch_exponent: 1.0 };
        assert_eq!(decay_fidelity(&d, 0.0).value(), 1.0);
        assert!((decay_fidelity(&d, 1e6).value() - 0.25).abs() < 1e-15);
        let at_t2 = decay_fidelity(&d, 2.0).value();
        assert!((at_t2 - (0.75 / core::f64::consts::E + 0.25)).abs() < 1e-15);
        let t = time_to_fidelity(&d, 0.5).unwrap();
        assert!((decay_fidelity(&d, t).value() - 0.5).abs() < 1e-12);
        assert!(time_to_fidelity(&d, 0.25).is_none());
        assert!(DecayParams { f_background: 0.1, ..d }.validate().is_err());
    }

    #[test]
    fn swap_examples() {
        assert_eq!(swap_fidelity(f(1.0), f(1.0), 1.0).value(), 1.0);
        assert!((swap_fidelity(f(1.0), f(0.83), 1.0).value() - 0.83).abs() < 1e-15);
        assert_eq!(swap_fidelity(f(0.25), f(0.25), 1.0).value(), 0.25);
        let oracle = oracle::oracle_swap(f(0.9), f(0.9)).unwrap();
        assert!((swap_fidelity(f(0.9), f(0.9), 1.0).value() - oracle.value()).abs() < 1e-9);
        assert_eq!(f(0.1).value(), 0.25);
        assert_eq!(f(1.2).value(), 1.0);
    }

    #[test]
    fn end_to_end_examples() {
        assert_eq!(end_to_end_fidelity(&[f(0.8)], &[]).unwrap(), f(0.8));
        assert_eq!(end_to_end_fidelity(&[f(1.0); 3], &[1.0, 1.0]).unwrap().value(), 1.0);
        let path = [f(0.95), f(0.9), f(0.85)];
        let inner = oracle::oracle_swap(f(0.9), f(0.85)).unwrap();
        let nested = oracle::oracle_swap(f(0.95), inner).unwrap();
        let got = end_to_end_fidelity(&path, &[1.0, 1.0]).unwrap();
        assert!((got.value() - nested.value()).abs() < 1e-9);
        assert_eq!(end_to_end_fidelity(&[], &[]), Err(QuantumError::EmptyPath));
        assert_eq!(
            end_to_end_fidelity(&path, &[1.0]),
            Err(QuantumError::QualityCount { expected: 2, got: 1 })
        );
    }

    proptest! {
        #[test]
        fn swap_commutative_and_monotone(a in 0.25f64..1.0, b in 0.25f64..1.0, q in 0.0f64..1.0, da in 0.0f64..0.2, dq in 0.0f64..0.2) {
            let s = swap_fidelity(f(a), f(b), q).value();
            prop_assert!((s - swap_fidelity(f(b), f(a), q).value()).abs() < 1e-15);
            prop_assert!(swap_fidelity(f(a + da), f(b), q).value() >= s);
            prop_assert!(swap_fidelity(f(a), f(b), (q + dq).min(1.0)).value() >= s);
        }

        #[test]
        fn fold_is_association_free(fs in proptest::collection::vec(0.25f64..1.0, 1..=8), qs in proptest::collection::vec(0.5f64..1.0, 8)) {
            let path: alloc::vec::Vec<_> = fs.iter().map(|&x| f(x)).collect();
            let q = &qs[..path.len() - 1];
            let right = end_to_end_fidelity(&path, q).unwrap().value();
            let mut left = path[0];
            for (link, quality) in path[1..].iter().zip(q) {
                left = swap_fidelity(left, *link, *quality);
            }
            prop_assert!((right - left.value()).abs() < 1e-9);
        }

        #[test]
        fn decay_non_increasing(t1 in 0.0f64..10.0, t2 in 0.0f64..10.0, k in 0.3f64..3.0) {
            let d = DecayParams { stretch_exponent: k, ..DecayParams::default() };
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(decay_fidelity(&d, lo).value() >= decay_fidelity(&d, hi).value());
        }
    }
}
