use super::Policy;
use crate::env::{Dynamics, EnvState, EnvironmentDefinition, GridLayout};

/// Hand-written grid controller: steers toward the centre of the neighbouring cell
/// that is one step closer to the goal along the corridor, with velocity damping.
/// Used as a known-good policy in tests.
#[derive(Debug, Clone)]
pub struct WaypointController {
    grid: GridLayout,
    pub gain: f64,
    pub damping: f64,
}

impl WaypointController {
    pub fn new(env: &EnvironmentDefinition) -> Option<Self> {
        match &env.dynamics {
            Dynamics::Grid(grid) => Some(Self {
                grid: grid.clone(),
                gain: 4.0,
                damping: 3.0,
            }),
            Dynamics::Push(_) => None,
        }
    }

    fn waypoint(&self, state: &EnvState) -> [f64; 2] {
        let (gr, gc) = self.grid.cell_of(state.goal_pos);
        let field = self.grid.bfs((gr as usize, gc as usize));
        let (r, c) = self.grid.cell_of(state.agent_pos);
        let here = field[r as usize * self.grid.cols + c as usize];
        if here == 0 {
            return state.goal_pos;
        }
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if self.grid.is_free(nr, nc) && field[nr as usize * self.grid.cols + nc as usize] + 1 == here {
                return GridLayout::center((nr as usize, nc as usize));
            }
        }
        state.goal_pos
    }
}

impl Policy for WaypointController {
    fn act(&self, state: &EnvState, _obs: &[f64], action: &mut [f64]) {
        let target = self.waypoint(state);
        for axis in 0..2 {
            let err = target[axis] - state.agent_pos[axis];
            action[axis] = (self.gain * err - self.damping * state.agent_vel[axis]).clamp(-1.0, 1.0);
        }
    }
}
