//! Four-state cell belief.

use serde::{Deserialize, Serialize};

/// Lower bound applied to every component after each update so no state
/// becomes absorbing under the multiplicative Bayesian product.
pub const PROB_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum State {
    Unknown = 0,
    Free = 1,
    Static = 2,
    Dynamic = 3,
}

impl State {
    pub const ALL: [State; 4] = [State::Unknown, State::Free, State::Static, State::Dynamic];

    pub fn from_u8(v: u8) -> Option<State> {
        State::ALL.get(v as usize).copied()
    }

    pub fn is_occupied(self) -> bool {
        matches!(self, State::Static | State::Dynamic)
    }

    pub fn symbol(self) -> char {
        match self {
            State::Unknown => 'U',
            State::Free => 'F',
            State::Static => 'S',
            State::Dynamic => 'D',
        }
    }
}

/// Probability distribution over {unknown, free, static, dynamic}.
///
/// Constructed values always sum to one and respect [`PROB_FLOOR`] on every
/// component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBelief([f64; 4]);

impl CellBelief {
    pub const UNIFORM: CellBelief = CellBelief([0.25; 4]);

    /// Fully unknown cell, floored.
    pub fn unknown() -> Self {
        Self::one_hot(State::Unknown)
    }

    /// Floor-respecting point mass: `1 - 3·floor` on `state`, `floor` elsewhere.
    pub fn one_hot(state: State) -> Self {
        let mut p = [PROB_FLOOR; 4];
        p[state as usize] = 1.0 - 3.0 * PROB_FLOOR;
        CellBelief(p)
    }

    /// Normalizes arbitrary non-negative weights and projects them onto the
    /// floored simplex. Returns `None` when the weights carry no mass.
    pub fn from_weights(w: [f64; 4]) -> Option<Self> {
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || w.iter().any(|&x| x < 0.0 || x.is_nan()) {
            return None;
        }
        Some(CellBelief(project_floor(w.map(|x| x / sum))))
    }

    /// Wraps probabilities without normalizing; only for values already known
    /// to satisfy the invariants (tests, decoded snapshots).
    pub fn from_raw(p: [f64; 4]) -> Self {
        CellBelief(p)
    }

    pub fn probs(&self) -> [f64; 4] {
        self.0
    }

    #[inline]
    pub fn p(&self, s: State) -> f64 {
        self.0[s as usize]
    }

    pub fn occupancy(&self) -> f64 {
        self.0[2] + self.0[3]
    }

    /// Most probable state; ties resolve to the lower state index.
    pub fn argmax(&self) -> State {
        let mut best = 0;
        for k in 1..4 {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        State::ALL[best]
    }
}

/// Raises components below the floor to the floor and rescales the rest so
/// the total stays one. Input must already sum to one.
fn project_floor(mut p: [f64; 4]) -> [f64; 4] {
    let mut pinned = [false; 4];
    loop {
        let mut changed = false;
        for k in 0..4 {
            if !pinned[k] && p[k] < PROB_FLOOR {
                pinned[k] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_pinned = pinned.iter().filter(|&&b| b).count();
        let free_mass = 1.0 - n_pinned as f64 * PROB_FLOOR;
        let unpinned_sum: f64 = (0..4).filter(|&k| !pinned[k]).map(|k| p[k]).sum();
        for k in 0..4 {
            if pinned[k] {
                p[k] = PROB_FLOOR;
            } else if unpinned_sum > 0.0 {
                p[k] *= free_mass / unpinned_sum;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_hot_respects_floor() {
        let b = CellBelief::one_hot(State::Static);
        assert_eq!(b.argmax(), State::Static);
        assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(b.p(State::Free), PROB_FLOOR);
    }

    #[test]
    fn uniform_argmax_is_unknown() {
        assert_eq!(CellBelief::UNIFORM.argmax(), State::Unknown);
    }

    #[test]
    fn zero_mass_is_rejected() {
        assert!(CellBelief::from_weights([0.0; 4]).is_none());
        assert!(CellBelief::from_weights([f64::NAN, 1.0, 0.0, 0.0]).is_none());
    }

    proptest! {
        #[test]
        fn weights_project_onto_floored_simplex(
            w in proptest::array::uniform4(0.0f64..10.0).prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-9)
        ) {
            let b = CellBelief::from_weights(w).unwrap();
            let p = b.probs();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for x in p {
                prop_assert!(x >= PROB_FLOOR - 1e-15);
                prop_assert!(x <= 1.0 - PROB_FLOOR + 1e-15);
            }
        }
    }
}
