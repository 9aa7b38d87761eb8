use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::GridLayout;
use super::{
    normalize, sanitize_action, Dynamics, EnvironmentDefinition, GoalSpec, Observation, PushLayout,
    TerminateOn, ACCELERATION, MAX_SPEED,
};

/// Mutable state of one episode. One instance serves one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub agent_pos: [f64; 2],
    pub agent_vel: [f64; 2],
    pub block_pos: [f64; 2],
    pub goal_pos: [f64; 2],
    goal_cell: (usize, usize),
    goal_field: Vec<u32>,
    pub steps: usize,
    pub success: bool,
    pub failed: bool,
    pub terminated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFlags {
    pub terminated: bool,
    pub success: bool,
}

impl EnvState {
    pub(crate) fn new(env: &EnvironmentDefinition, spec: &GoalSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &env.dynamics {
            Dynamics::Grid(grid) => {
                let (lo, hi) = env.goal_range(spec, "goal_distance");
                let cells = grid.admissible_goals(lo, hi);
                let goal_cell = cells[rng.random_range(0..cells.len())];
                let mut state = Self {
                    agent_pos: GridLayout::center(grid.start),
                    agent_vel: [0.0; 2],
                    block_pos: [0.0; 2],
                    goal_pos: GridLayout::center(goal_cell),
                    goal_cell,
                    goal_field: grid.bfs(goal_cell),
                    steps: 0,
                    success: false,
                    failed: false,
                    terminated: false,
                };
                state.success = state.grid_success(grid);
                state
            }
            Dynamics::Push(push) => {
                let (lo, hi) = env.goal_range(spec, "goal_radius");
                let radius = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                let u: f64 = rng.random();
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = radius * u.sqrt();
                let goal = [
                    (push.block_start[0] + r * theta.cos()).clamp(push.block_radius, push.size - push.block_radius),
                    (push.block_start[1] + r * theta.sin()).clamp(push.block_radius, push.size - push.block_radius),
                ];
                let mut state = Self {
                    agent_pos: push.agent_start,
                    agent_vel: [0.0; 2],
                    block_pos: push.block_start,
                    goal_pos: goal,
                    goal_cell: (0, 0),
                    goal_field: Vec::new(),
                    steps: 0,
                    success: false,
                    failed: false,
                    terminated: false,
                };
                state.success = dist(state.block_pos, state.goal_pos) < push.success_radius;
                state
            }
        }
    }

    fn grid_success(&self, grid: &GridLayout) -> bool {
        dist(self.agent_pos, self.goal_pos) < grid.success_radius
    }

    /// Applies one action; components are clamped to `[-1, 1]` first.
    pub fn advance(&mut self, env: &EnvironmentDefinition, action: &[f64]) -> StepFlags {
        let a = [
            sanitize_action(action.first().copied().unwrap_or(0.0)),
            sanitize_action(action.get(1).copied().unwrap_or(0.0)),
        ];
        let dt = env.dt;
        for (v, a) in self.agent_vel.iter_mut().zip(a) {
            *v += a * ACCELERATION * dt;
        }
        let speed = (self.agent_vel[0].powi(2) + self.agent_vel[1].powi(2)).sqrt();
        if speed > MAX_SPEED {
            let scale = MAX_SPEED / speed;
            self.agent_vel[0] *= scale;
            self.agent_vel[1] *= scale;
        }
        let delta = [self.agent_vel[0] * dt, self.agent_vel[1] * dt];
        match &env.dynamics {
            Dynamics::Grid(grid) => {
                let blocked = grid.slide(&mut self.agent_pos, delta);
                for (vel, blocked) in self.agent_vel.iter_mut().zip(blocked) {
                    if blocked {
                        *vel = 0.0;
                    }
                }
                self.success = self.grid_success(grid);
            }
            Dynamics::Push(push) => {
                self.push_step(push, delta);
                self.success = dist(self.block_pos, self.goal_pos) < push.success_radius;
            }
        }
        self.steps += 1;
        let by_policy = match env.terminate_on {
            TerminateOn::Success => self.success,
            TerminateOn::Failure => self.failed,
        };
        self.terminated = by_policy || self.steps >= env.horizon;
        StepFlags {
            terminated: self.terminated,
            success: self.success,
        }
    }

    /// Moves the pusher, then resolves contact by sliding the block out along the
    /// contact normal until the discs are tangent. Corners where both discs are
    /// pinned revert the step.
    fn push_step(&mut self, push: &PushLayout, delta: [f64; 2]) {
        let prev_agent = self.agent_pos;
        let prev_block = self.block_pos;
        let reach = push.agent_radius + push.block_radius;
        let lo_a = push.agent_radius;
        let hi_a = push.size - push.agent_radius;
        #[allow(clippy::needless_range_loop)]
        for axis in 0..2 {
            let next = self.agent_pos[axis] + delta[axis];
            if next < lo_a || next > hi_a {
                self.agent_vel[axis] = 0.0;
            }
            self.agent_pos[axis] = next.clamp(lo_a, hi_a);
        }
        let d = dist(self.agent_pos, self.block_pos);
        if d >= reach {
            return;
        }
        let normal = if d > 1e-12 {
            [
                (self.block_pos[0] - self.agent_pos[0]) / d,
                (self.block_pos[1] - self.agent_pos[1]) / d,
            ]
        } else {
            let s = delta[0].hypot(delta[1]);
            if s > 1e-12 {
                [delta[0] / s, delta[1] / s]
            } else {
                [1.0, 0.0]
            }
        };
        let lo_b = push.block_radius;
        let hi_b = push.size - push.block_radius;
        let pushed = [
            self.agent_pos[0] + normal[0] * reach,
            self.agent_pos[1] + normal[1] * reach,
        ];
        self.block_pos = [pushed[0].clamp(lo_b, hi_b), pushed[1].clamp(lo_b, hi_b)];
        if self.block_pos != pushed {
            // Block hit the workspace edge: back the agent off to tangency instead.
            let d = dist(self.agent_pos, self.block_pos);
            if d < reach {
                let away = if d > 1e-12 {
                    [
                        (self.agent_pos[0] - self.block_pos[0]) / d,
                        (self.agent_pos[1] - self.block_pos[1]) / d,
                    ]
                } else {
                    [-normal[0], -normal[1]]
                };
                let backed = [
                    self.block_pos[0] + away[0] * reach,
                    self.block_pos[1] + away[1] * reach,
                ];
                self.agent_pos = [backed[0].clamp(lo_a, hi_a), backed[1].clamp(lo_a, hi_a)];
                self.agent_vel = [0.0; 2];
            }
            if dist(self.agent_pos, self.block_pos) < reach - 1e-9 {
                self.agent_pos = prev_agent;
                self.block_pos = prev_block;
                self.agent_vel = [0.0; 2];
            }
        }
    }

    /// Writes the normalized observation into `out` (length = observation dims).
    pub fn write_observation(&self, env: &EnvironmentDefinition, out: &mut [f64]) {
        let alive = if self.failed { 0.0 } else { 1.0 };
        let raw: [f64; 11];
        let n = match &env.dynamics {
            Dynamics::Grid(grid) => {
                let gap = [self.goal_pos[0] - self.agent_pos[0], self.goal_pos[1] - self.agent_pos[1]];
                let euclid = gap[0].hypot(gap[1]);
                let dir = if euclid > 1e-12 {
                    [gap[0] / euclid, gap[1] / euclid]
                } else {
                    [0.0, 0.0]
                };
                let path = grid.path_distance(self.agent_pos, self.goal_cell, &self.goal_field);
                raw = [
                    self.agent_pos[0],
                    self.agent_pos[1],
                    self.agent_vel[0],
                    self.agent_vel[1],
                    self.goal_pos[0],
                    self.goal_pos[1],
                    path,
                    dir[0],
                    dir[1],
                    alive,
                    0.0,
                ];
                10
            }
            Dynamics::Push(_) => {
                raw = [
                    self.agent_pos[0],
                    self.agent_pos[1],
                    self.agent_vel[0],
                    self.agent_vel[1],
                    self.block_pos[0],
                    self.block_pos[1],
                    self.goal_pos[0],
                    self.goal_pos[1],
                    dist(self.agent_pos, self.block_pos),
                    dist(self.block_pos, self.goal_pos),
                    alive,
                ];
                11
            }
        };
        let mut k = 0;
        for v in &env.variables {
            for c in 0..v.dims {
                out[k] = normalize(raw[k], v.lower[c], v.upper[c]);
                k += 1;
            }
        }
        debug_assert_eq!(k, n);
    }

    pub fn observe(&self, env: &EnvironmentDefinition) -> Observation {
        let mut values = vec![0.0; env.observation_dims()];
        self.write_observation(env, &mut values);
        Observation { values }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
