use serde::{Deserialize, Serialize};

/// Transverse potential in the evolution region, as a phase rate in rad/mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Potential {
    Free,
    Harmonic { omega: f64 },
}

impl Potential {
    /// `V(x)` for effective mass `k`: zero in free space, `k ω² x² / 2` in the GRIN lens.
    pub fn value(&self, x: f64, k: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => 0.5 * k * omega * omega * x * x,
        }
    }

    pub fn omega(&self) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => omega,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Free => "free",
            Potential::Harmonic { .. } => "harmonic",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn free_is_zero() {
        assert_eq!(Potential::Free.value(3.0, 7900.0), 0.0);
    }

    #[test]
    fn harmonic_value() {
        let v = Potential::Harmonic { omega: 0.2 }.value(0.1, 100.0);
        assert!((v - 0.5 * 100.0 * 0.04 * 0.01).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn harmonic_is_even(x in -10.0f64..10.0, w in 0.0f64..5.0, k in 1.0f64..1e4) {
            let p = Potential::Harmonic { omega: w };
            prop_assert_eq!(p.value(x, k), p.value(-x, k));
        }
    }
}
