use super::{
    Dynamics, EnvError, EnvironmentDefinition, GoalDimension, GoalSpec, GridLayout, PushLayout,
    StateVariable, TerminateOn, MAX_SPEED,
};

pub fn builtin_ids() -> &'static [&'static str] {
    &["point_maze", "point_push", "point_open"]
}

pub fn builtin(id: &str) -> Result<EnvironmentDefinition, EnvError> {
    match id {
        "point_maze" => Ok(point_maze()),
        "point_push" => Ok(point_push()),
        "point_open" => Ok(point_open()),
        other => Err(EnvError::UnknownEnvironment(other.to_string())),
    }
}

fn grid_variables(grid: &GridLayout) -> Vec<StateVariable> {
    let (w, h) = (grid.width(), grid.height());
    let diameter = w.hypot(h);
    let pos = |name: &str, desc: &str| StateVariable {
        name: name.into(),
        dims: 2,
        lower: vec![0.0, 0.0],
        upper: vec![w, h],
        description: desc.into(),
    };
    vec![
        pos("agent_pos", "position of the agent (x, y)"),
        StateVariable::uniform("agent_vel", 2, -MAX_SPEED, MAX_SPEED, "velocity of the agent (x, y)"),
        pos("goal_pos", "position of the goal (x, y)"),
        StateVariable::uniform(
            "dist_to_goal",
            1,
            0.0,
            diameter,
            "shortest-path distance through the maze corridors from the agent to the goal",
        ),
        StateVariable::uniform(
            "goal_direction",
            2,
            -1.0,
            1.0,
            "unit vector pointing from the agent straight towards the goal (ignores walls)",
        ),
        StateVariable::uniform(
            "is_alive",
            1,
            0.0,
            1.0,
            "1 if the episode is healthy, 0 if it was terminated by failure",
        ),
    ]
}

/// U-shaped corridor maze. The free cells form a U around a two-cell wall block;
/// the agent starts in the bottom-left cell and the target goal is the top-left cell.
pub fn point_maze() -> EnvironmentDefinition {
    let grid = GridLayout::from_ascii(&["#####", "#...#", "###.#", "#...#", "#####"], (3, 1));
    let max = grid.max_goal_distance() as f64;
    EnvironmentDefinition::new(
        "point_maze",
        grid_variables(&grid),
        2,
        vec![GoalDimension {
            name: "goal_distance".into(),
            min: 0.0,
            max,
            description: "range of corridor path distance (in cells) between the start cell and the goal cell; \
                          goals are drawn uniformly among free cells whose distance lies in the range"
                .into(),
        }],
        200,
        0.1,
        GoalSpec::single("goal_distance", max, max),
        "The agent is a point mass moving in a 5 x 5 grid maze of unit cells (x to the right, y downwards). \
         Outer cells are walls. The free corridor forms a U: the bottom row (y in [3, 4]) and the top row \
         (y in [1, 2]) run from x = 1 to x = 4 and are joined by a vertical corridor on the right (x in [3, 4]). \
         A wall block fills x in [1, 3], y in [2, 3] between the two rows. The agent starts at rest at the centre \
         of the bottom-left cell (1.5, 3.5). Actions are accelerations; speed is capped at 1 unit per second and \
         collisions with walls stop motion along that axis. An episode succeeds when the agent is within 0.5 of \
         the goal, which ends the episode, and otherwise lasts 200 steps of 0.1 seconds.",
        "Reach the goal at the centre of the top-left cell (1.5, 1.5), the far end of the U, 6 cells away \
         from the start along the corridor.",
        TerminateOn::Success,
        Dynamics::Grid(grid),
    )
}

/// Open 3 x 3 arena with the agent starting in the middle; episodes never terminate early.
pub fn point_open() -> EnvironmentDefinition {
    let grid = GridLayout::from_ascii(&["#####", "#...#", "#...#", "#...#", "#####"], (2, 2));
    let max = grid.max_goal_distance() as f64;
    EnvironmentDefinition::new(
        "point_open",
        grid_variables(&grid),
        2,
        vec![GoalDimension {
            name: "goal_distance".into(),
            min: 0.0,
            max,
            description: "range of path distance (in cells) between the start cell and the goal cell".into(),
        }],
        100,
        0.1,
        GoalSpec::single("goal_distance", max, max),
        "The agent is a point mass in an open 3 x 3 arena (x, y in [1, 4]) inside a 5 x 5 frame of walls. \
         It starts at rest at the centre (2.5, 2.5). Actions are accelerations; speed is capped at 1 unit per \
         second. Episodes always last 100 steps of 0.1 seconds.",
        "Reach the goal cell.",
        TerminateOn::Failure,
        Dynamics::Grid(grid),
    )
}

/// Planar pushing: a pusher disc must shove a block disc onto a goal.
pub fn point_push() -> EnvironmentDefinition {
    let layout = PushLayout {
        size: 4.0,
        agent_radius: 0.2,
        block_radius: 0.3,
        agent_start: [1.0, 1.0],
        block_start: [2.0, 2.0],
        success_radius: 0.5,
    };
    let s = layout.size;
    let diameter = s.hypot(s);
    let pos = |name: &str, desc: &str| StateVariable::uniform(name, 2, 0.0, s, desc);
    let variables = vec![
        pos("agent_pos", "position of the pusher disc (x, y)"),
        StateVariable::uniform("agent_vel", 2, -MAX_SPEED, MAX_SPEED, "velocity of the pusher disc (x, y)"),
        pos("block_pos", "position of the block (x, y)"),
        pos("goal_pos", "position of the goal for the block (x, y)"),
        StateVariable::uniform("dist_agent_block", 1, 0.0, diameter, "distance between pusher and block centres"),
        StateVariable::uniform("dist_block_goal", 1, 0.0, diameter, "distance between block centre and goal"),
        StateVariable::uniform(
            "is_alive",
            1,
            0.0,
            1.0,
            "1 if the episode is healthy, 0 if it was terminated by failure",
        ),
    ];
    EnvironmentDefinition::new(
        "point_push",
        variables,
        2,
        vec![GoalDimension {
            name: "goal_radius".into(),
            min: 0.0,
            max: 1.5,
            description: "radius of the disc around the block's start position that goals are drawn from; \
                          each episode draws a radius uniformly from the range and a goal uniformly inside that disc"
                .into(),
        }],
        200,
        0.1,
        GoalSpec::single("goal_radius", 1.5, 1.5),
        "A pusher disc of radius 0.2 moves in a 4 x 4 walled workspace. A block disc of radius 0.3 rests at \
         (2, 2); the pusher starts at rest at (1, 1). Actions accelerate the pusher; speed is capped at 1 unit \
         per second. The block never moves by itself: when the pusher touches it, the block slides away along \
         the line between their centres. An episode succeeds when the block centre is within 0.5 of the goal, \
         which ends the episode, and otherwise lasts 200 steps of 0.1 seconds.",
        "Push the block onto a goal drawn uniformly from the disc of radius 1.5 around the block's start.",
        TerminateOn::Success,
        Dynamics::Push(layout),
    )
}
