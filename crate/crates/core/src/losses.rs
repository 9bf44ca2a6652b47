//! Value of rational complementation and the reliance / discrimination split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Δ` at or below this (payoff units) is treated as zero.
pub const DELTA_TOLERANCE: f64 = 1e-9;

/// `Δ = R − R∅`.
pub fn complementation(r_benchmark: f64, r_baseline: f64) -> f64 {
    r_benchmark - r_baseline
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossDecomposition {
    pub delta: f64,
    /// `(R − R^m)/Δ`, or the raw difference when degenerate.
    pub reliance_loss: f64,
    /// `(R^m − B)/Δ`, or the raw difference when degenerate.
    pub discrimination_loss: f64,
    /// `(B − R∅)/Δ`; absent when degenerate.
    pub normalized_behavioral: Option<f64>,
    pub degenerate: bool,
}

pub fn decompose(r_benchmark: f64, r_misreliant: f64, b_behavioral: f64, delta: f64) -> LossDecomposition {
    let reliance = r_benchmark - r_misreliant;
    let discrimination = r_misreliant - b_behavioral;
    if delta.abs() <= DELTA_TOLERANCE {
        return LossDecomposition {
            delta,
            reliance_loss: reliance,
            discrimination_loss: discrimination,
            normalized_behavioral: None,
            degenerate: true,
        };
    }
    let r_baseline = r_benchmark - delta;
    LossDecomposition {
        delta,
        reliance_loss: reliance / delta,
        discrimination_loss: discrimination / delta,
        normalized_behavioral: Some((b_behavioral - r_baseline) / delta),
        degenerate: false,
    }
}

/// Rescales so that `R∅ ↦ 0` and `R ↦ 1`.
pub fn normalize(score: f64, r_baseline: f64, delta: f64) -> Result<f64> {
    if delta.abs() <= DELTA_TOLERANCE {
        return Err(Error::DegenerateDelta(delta));
    }
    Ok((score - r_baseline) / delta)
}

/// Difference of two conditions' behavioral payoffs in units of `Δ`.
pub fn condition_gap(b_alpha: f64, b_beta: f64, delta: f64) -> Result<f64> {
    if delta.abs() <= DELTA_TOLERANCE {
        return Err(Error::DegenerateDelta(delta));
    }
    Ok((b_alpha - b_beta) / delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelianceClass {
    UnderReliance,
    Appropriate,
    OverReliance,
}

/// Sign of `γ^b − γ^r`.
pub fn classify_reliance(gamma_behavioral: f64, gamma_rational: f64) -> RelianceClass {
    let d = gamma_behavioral - gamma_rational;
    if d.abs() <= 1e-12 {
        RelianceClass::Appropriate
    } else if d < 0.0 {
        RelianceClass::UnderReliance
    } else {
        RelianceClass::OverReliance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn four_trial_worked_example() {
        let delta = complementation(1.0, 0.75);
        assert_eq!(delta, 0.25);
        let d = decompose(1.0, 1.0, 0.5, delta);
        assert!(!d.degenerate);
        assert_eq!(d.reliance_loss, 0.0);
        assert_eq!(d.discrimination_loss, 2.0);
        assert_eq!(d.normalized_behavioral, Some(-1.0));
        assert_eq!(normalize(0.5, 0.75, 0.25).unwrap(), -1.0);
    }

    #[test]
    fn complementation_from_two_type_closed_form() {
        assert_abs_diff_eq!(complementation(0.9, 0.7), 0.2, epsilon = 1e-15);
        assert_eq!(complementation(0.7, 0.7), 0.0);
    }

    #[test]
    fn optimal_behavior_has_no_loss() {
        let d = decompose(0.9, 0.9, 0.9, 0.2);
        assert_eq!((d.reliance_loss, d.discrimination_loss), (0.0, 0.0));
    }

    #[test]
    fn zero_delta_is_flagged() {
        let d = decompose(0.7, 0.65, 0.6, 0.0);
        assert!(d.degenerate);
        assert_abs_diff_eq!(d.reliance_loss, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(d.discrimination_loss, 0.05, epsilon = 1e-15);
        assert_eq!(d.normalized_behavioral, None);
        assert_eq!(normalize(0.7, 0.7, 0.0), Err(Error::DegenerateDelta(0.0)));
    }

    #[test]
    fn classification() {
        assert_eq!(classify_reliance(0.2, 0.5), RelianceClass::UnderReliance);
        assert_eq!(classify_reliance(0.8, 0.5), RelianceClass::OverReliance);
        assert_eq!(classify_reliance(0.5, 0.5), RelianceClass::Appropriate);
    }

    proptest! {
        #[test]
        fn losses_add_up(r in 0.0f64..1.0, frac_m in 0.0f64..1.0, frac_b in 0.0f64..1.0, delta in 0.001f64..1.0) {
            let rm = r * frac_m;
            let b = rm * frac_b;
            let d = decompose(r, rm, b, delta);
            prop_assert!((d.reliance_loss + d.discrimination_loss - (r - b) / delta).abs() <= 1e-9);
        }

        #[test]
        fn normalization_endpoints_and_gaps(base in 0.0f64..1.0, delta in 0.001f64..1.0, ba in 0.0f64..1.0, bb in 0.0f64..1.0) {
            prop_assert!(normalize(base, base, delta).unwrap().abs() <= 1e-12);
            prop_assert!((normalize(base + delta, base, delta).unwrap() - 1.0).abs() <= 1e-9);
            let gap = condition_gap(ba, bb, delta).unwrap();
            let diff = normalize(ba, base, delta).unwrap() - normalize(bb, base, delta).unwrap();
            prop_assert!((gap - diff).abs() <= 1e-9 * (1.0 + gap.abs()));
        }
    }
}
