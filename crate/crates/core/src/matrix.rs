//! Iterated two-player matrix games, primarily the prisoner's dilemma.

use crate::error::{Error, Result};
use crate::game::StageGame;

/// Action index for cooperation.
pub const COOPERATE: usize = 0;
/// Action index for defection.
pub const DEFECT: usize = 1;

/// Payoffs of the symmetric 2x2 dilemma, ordered temptation > cooperation >
/// defection > loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    pub temptation: f64,
    pub cooperation: f64,
    pub defection: f64,
    pub loss: f64,
}

impl PayoffMatrix {
    pub fn new(temptation: f64, cooperation: f64, defection: f64, loss: f64) -> Result<Self> {
        if !(temptation > cooperation && cooperation > defection && defection > loss) {
            return Err(Error::InvalidParameter(format!(
                "payoffs must satisfy temptation > cooperation > defection > loss, \
                 got ({temptation}, {cooperation}, {defection}, {loss})"
            )));
        }
        Ok(Self {
            temptation,
            cooperation,
            defection,
            loss,
        })
    }

    /// The {0, -1, -2, -3} parameterization.
    pub fn standard() -> Self {
        Self {
            temptation: 0.0,
            cooperation: -1.0,
            defection: -2.0,
            loss: -3.0,
        }
    }
}

/// Payoffs for one round, as (row reward, column reward).
pub fn pd_payoff(matrix: &PayoffMatrix, action_i: usize, action_j: usize) -> Result<(f64, f64)> {
    let cell = |a: usize| -> Result<usize> {
        if a > DEFECT {
            Err(Error::Domain(format!("action index {a} out of range for a 2x2 game")))
        } else {
            Ok(a)
        }
    };
    let (i, j) = (cell(action_i)?, cell(action_j)?);
    Ok(match (i, j) {
        (COOPERATE, COOPERATE) => (matrix.cooperation, matrix.cooperation),
        (COOPERATE, DEFECT) => (matrix.loss, matrix.temptation),
        (DEFECT, COOPERATE) => (matrix.temptation, matrix.loss),
        _ => (matrix.defection, matrix.defection),
    })
}

/// Memory-1 state of the iterated game: the joint action played last period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixGameState {
    pub last_actions: (usize, usize),
}

impl MatrixGameState {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a > DEFECT || b > DEFECT {
            return Err(Error::Domain(format!("actions ({a}, {b}) out of range")));
        }
        Ok(Self { last_actions: (a, b) })
    }
}

/// Play one round: the next state is the joint action itself.
pub fn step(
    matrix: &PayoffMatrix,
    _state: MatrixGameState,
    actions: (usize, usize),
) -> Result<(MatrixGameState, (f64, f64))> {
    let rewards = pd_payoff(matrix, actions.0, actions.1)?;
    Ok((MatrixGameState::new(actions.0, actions.1)?, rewards))
}

/// The iterated dilemma as a stage game.
pub struct MatrixGame {
    payoffs: PayoffMatrix,
}

impl MatrixGame {
    pub fn new(payoffs: PayoffMatrix) -> Self {
        Self { payoffs }
    }

    pub fn payoffs(&self) -> &PayoffMatrix {
        &self.payoffs
    }
}

impl StageGame for MatrixGame {
    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn rewards(&self, joint: &[usize]) -> Vec<f64> {
        debug_assert!(self.validate_joint(joint).is_ok());
        let (r0, r1) = pd_payoff(&self.payoffs, joint[0], joint[1])
            .expect("joint action validated by the runner");
        vec![r0, r1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_payoffs() {
        let m = PayoffMatrix::standard();
        assert_eq!(pd_payoff(&m, COOPERATE, COOPERATE).unwrap(), (-1.0, -1.0));
        assert_eq!(pd_payoff(&m, DEFECT, COOPERATE).unwrap(), (0.0, -3.0));
        assert_eq!(pd_payoff(&m, COOPERATE, DEFECT).unwrap(), (-3.0, 0.0));
        assert_eq!(pd_payoff(&m, DEFECT, DEFECT).unwrap(), (-2.0, -2.0));
    }

    #[test]
    fn payoff_is_symmetric_under_role_swap() {
        let m = PayoffMatrix::standard();
        for a in [COOPERATE, DEFECT] {
            for b in [COOPERATE, DEFECT] {
                let (ra, rb) = pd_payoff(&m, a, b).unwrap();
                let (rb2, ra2) = pd_payoff(&m, b, a).unwrap();
                assert_eq!((ra, rb), (ra2, rb2));
            }
        }
    }

    #[test]
    fn ordering_is_enforced() {
        assert!(PayoffMatrix::new(0.0, -1.0, -1.0, -3.0).is_err());
        assert!(PayoffMatrix::new(-1.0, 0.0, -2.0, -3.0).is_err());
        assert!(PayoffMatrix::new(3.0, 2.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn out_of_range_actions_are_rejected() {
        let m = PayoffMatrix::standard();
        assert!(matches!(pd_payoff(&m, 2, 0), Err(Error::Domain(_))));
        assert!(matches!(pd_payoff(&m, 0, 7), Err(Error::Domain(_))));
    }

    #[test]
    fn step_moves_to_the_played_joint_action() {
        let m = PayoffMatrix::standard();
        let s0 = MatrixGameState::new(COOPERATE, COOPERATE).unwrap();
        let (s1, r) = step(&m, s0, (DEFECT, DEFECT)).unwrap();
        assert_eq!(s1.last_actions, (DEFECT, DEFECT));
        assert_eq!(r, (-2.0, -2.0));
    }

    #[test]
    fn repeating_an_action_is_a_fixed_point() {
        let m = PayoffMatrix::standard();
        for joint in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let s = MatrixGameState::new(joint.0, joint.1).unwrap();
            let (next, _) = step(&m, s, joint).unwrap();
            assert_eq!(next, s);
        }
    }

    #[test]
    fn full_transition_table_is_deterministic() {
        // All 4 states x 4 joint actions: next state equals the joint action
        // regardless of the origin state, rewards follow the matrix.
        let m = PayoffMatrix::standard();
        for from in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for joint in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let s = MatrixGameState::new(from.0, from.1).unwrap();
                let (next, r) = step(&m, s, joint).unwrap();
                assert_eq!(next.last_actions, joint);
                assert_eq!(r, pd_payoff(&m, joint.0, joint.1).unwrap());
            }
        }
    }

    #[test]
    fn stage_game_interface_matches_payoff_table() {
        let g = MatrixGame::new(PayoffMatrix::standard());
        assert_eq!(g.rewards(&[DEFECT, COOPERATE]), vec![0.0, -3.0]);
        assert_eq!(g.n_agents(), 2);
        assert_eq!(g.n_actions(), 2);
        assert_eq!(g.action_value(0), None);
    }
}
