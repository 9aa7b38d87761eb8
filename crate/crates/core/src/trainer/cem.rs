use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Buffers};
use super::{LinearTanhPolicy, PolicyCheckpoint, RewardSource, TrainConfig, TrainError};
use crate::env::{EnvironmentDefinition, GoalSpec};
use crate::par::map_indexed;
use crate::seed::{derive_path, derive_seed};

/// One line of the fitness curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub iteration_best: f64,
    pub iteration_mean: f64,
    pub best_so_far: f64,
    pub sigma_mean: f64,
    pub faulted: usize,
    pub env_steps: u64,
}

impl CurveRow {
    pub const CSV_HEADER: &'static str = "iteration,iteration_best,iteration_mean,best_so_far,sigma_mean,faulted,env_steps";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.iteration_best,
            self.iteration_mean,
            self.best_so_far,
            self.sigma_mean,
            self.faulted,
            self.env_steps
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PolicyCheckpoint,
    pub curve: Vec<CurveRow>,
    pub best_fitness: f64,
    pub env_steps: u64,
}

impl TrainOutcome {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from(CurveRow::CSV_HEADER);
        out.push('\n');
        for row in &self.curve {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }
}

struct Fitness {
    value: f64,
    steps: u64,
    fault: Option<crate::dsl::RewardFault>,
}

#[allow(clippy::too_many_arguments)]
fn fitness(
    env: &EnvironmentDefinition,
    spec: &GoalSpec,
    reward: &RewardSource,
    params: &[f64],
    episode_seeds: &[u64],
    gamma: f64,
) -> Fitness {
    let policy = LinearTanhPolicy {
        params,
        features: env.observation_dims(),
    };
    let mut buf = Buffers::new(env, reward);
    let mut total = 0.0;
    let mut steps = 0;
    for &seed in episode_seeds {
        let r = run_episode(env, spec, &policy, reward, seed, gamma, &mut buf);
        steps += r.steps as u64;
        if let Some(fault) = r.fault {
            return Fitness {
                value: f64::NEG_INFINITY,
                steps,
                fault: Some(fault),
            };
        }
        total += r.discounted_return;
    }
    Fitness {
        value: total / episode_seeds.len() as f64,
        steps,
        fault: None,
    }
}

/// CEM over the linear-tanh parameters. Member 0 of every population is the current
/// mean; the rest are Gaussian perturbations of it. Returns the best member ever evaluated.
pub fn train(
    init: Option<&PolicyCheckpoint>,
    env: &EnvironmentDefinition,
    reward: &RewardSource,
    goal_spec: &GoalSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    env.validate_goal_spec(goal_spec)?;
    if let Some(c) = init {
        c.check(env)?;
    }
    let start = init.cloned().unwrap_or_else(|| PolicyCheckpoint::zeros(env));
    let n = start.params.len();
    let mut mean = start.params.clone();
    let sigma0 = if init.is_some() { cfg.sigma_init_warm } else { cfg.sigma_init_fresh };
    let mut sigma = vec![sigma0; n];
    let mut best = (f64::NEG_INFINITY, start.params.clone());
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut env_steps = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));

    for it in 0..cfg.iterations {
        let mut population = Vec::with_capacity(cfg.population);
        population.push(mean.clone());
        for _ in 1..cfg.population {
            let member: Vec<f64> = mean
                .iter()
                .zip(&sigma)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect();
            population.push(member);
        }
        let episode_seeds: Vec<u64> = (0..cfg.episodes_per_fitness as u64)
            .map(|j| derive_path(cfg.seed, &[1, it as u64, j]))
            .collect();
        let scores = map_indexed(cfg.exec, population.len(), |m| {
            fitness(env, goal_spec, reward, &population[m], &episode_seeds, cfg.gamma)
        });
        env_steps += scores.iter().map(|f| f.steps).sum::<u64>();

        let faulted = scores.iter().filter(|f| f.fault.is_some()).count();
        if it == 0 && faulted == scores.len() {
            return Err(TrainError::TaskCodeRuntimeFault(scores[0].fault.expect("faulted")));
        }
        let mut ranked: Vec<usize> = (0..scores.len()).filter(|&m| scores[m].fault.is_none()).collect();
        // descending fitness, lower index first on ties
        ranked.sort_by(|&a, &b| scores[b].value.total_cmp(&scores[a].value).then(a.cmp(&b)));

        let iteration_best = ranked.first().map_or(f64::NEG_INFINITY, |&m| scores[m].value);
        if let Some(&top) = ranked.first() {
            if scores[top].value > best.0 {
                best = (scores[top].value, population[top].clone());
            }
        }
        let iteration_mean = if ranked.is_empty() {
            f64::NEG_INFINITY
        } else {
            ranked.iter().map(|&m| scores[m].value).sum::<f64>() / ranked.len() as f64
        };

        let elite = &ranked[..cfg.elite_count.min(ranked.len())];
        if !elite.is_empty() {
            let k = elite.len() as f64;
            for d in 0..n {
                let mu = elite.iter().map(|&m| population[m][d]).sum::<f64>() / k;
                let var = elite.iter().map(|&m| (population[m][d] - mu).powi(2)).sum::<f64>() / k;
                mean[d] = mu;
                sigma[d] = var.sqrt().max(cfg.sigma_min);
            }
            debug_assert!(mean.iter().chain(&sigma).all(|v| v.is_finite()));
        }
        curve.push(CurveRow {
            iteration: it + 1,
            iteration_best,
            iteration_mean,
            best_so_far: best.0,
            sigma_mean: sigma.iter().sum::<f64>() / n as f64,
            faulted,
            env_steps,
        });
    }

    let mut checkpoint = start;
    checkpoint.params = best.1;
    Ok(TrainOutcome {
        checkpoint,
        curve,
        best_fitness: best.0,
        env_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, typecheck};
    use crate::env::{point_maze, point_open};
    use crate::par::Exec;

    fn program(env: &EnvironmentDefinition, src: &str) -> RewardSource {
        RewardSource::Program(typecheck(&parse_program(src).unwrap(), env).unwrap())
    }

    fn small(seed: u64) -> TrainConfig {
        TrainConfig {
            population: 16,
            elite_count: 4,
            iterations: 5,
            episodes_per_fitness: 2,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let env = point_maze();
        let reward = program(&env, "return -dist_to_goal");
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let out = train(None, &env, &reward, &env.target_goal_spec, &cfg).unwrap();
        assert_eq!(out.checkpoint, PolicyCheckpoint::zeros(&env));
        let mut init = PolicyCheckpoint::zeros(&env);
        init.params[4] = 0.75;
        init.provenance.candidate = 3;
        let out = train(Some(&init), &env, &reward, &env.target_goal_spec, &cfg).unwrap();
        assert_eq!(out.checkpoint, init);
        assert!(out.curve.is_empty());
        assert_eq!(out.env_steps, 0);
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let env = point_open();
        let reward = program(&env, "return -sq(agent_pos[0])");
        let spec = env.target_goal_spec.clone();
        let seq = TrainConfig {
            exec: Exec::Sequential,
            ..small(9)
        };
        let par = TrainConfig {
            exec: Exec::Parallel,
            ..small(9)
        };
        let a = train(None, &env, &reward, &spec, &seq).unwrap();
        let b = train(None, &env, &reward, &spec, &par).unwrap();
        let c = train(None, &env, &reward, &spec, &seq).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.checkpoint).unwrap(),
            serde_json::to_string(&c.checkpoint).unwrap()
        );
    }

    #[test]
    fn best_so_far_is_monotone() {
        let env = point_maze();
        let reward = program(&env, "return -dist_to_goal");
        let out = train(None, &env, &reward, &GoalSpec::single("goal_distance", 0.0, 3.0), &small(2)).unwrap();
        for w in out.curve.windows(2) {
            assert!(w[1].best_so_far >= w[0].best_so_far);
        }
        assert_eq!(out.best_fitness, out.curve.last().unwrap().best_so_far);
    }

    #[test]
    fn all_faulting_first_iteration_is_an_error() {
        let env = point_maze();
        let reward = program(&env, "return 1 / (agent_vel[0] - agent_vel[0])");
        let err = train(None, &env, &reward, &env.target_goal_spec, &small(0)).unwrap_err();
        assert!(matches!(err, TrainError::TaskCodeRuntimeFault(_)));
    }

    #[test]
    fn partial_faults_are_excluded() {
        // faults only for members whose first action pushes left
        let env = point_open();
        let reward = program(&env, "return 1 / max(action[0], 0)");
        let out = train(None, &env, &reward, &env.target_goal_spec, &small(4)).unwrap();
        assert!(out.best_fitness.is_finite());
        assert!(out.checkpoint.params.iter().all(|p| p.is_finite()));
        assert!(out.curve.iter().any(|r| r.faulted > 0));
    }

    #[test]
    fn steps_are_counted() {
        let env = point_open();
        let reward = program(&env, "return 0");
        let out = train(None, &env, &reward, &env.target_goal_spec, &small(1)).unwrap();
        // open arena episodes always run to the horizon
        assert_eq!(out.env_steps, 5 * 16 * 2 * env.horizon as u64);
        assert_eq!(out.curve.last().unwrap().env_steps, out.env_steps);
    }

    #[test]
    fn curve_csv_has_header_and_rows() {
        let env = point_open();
        let reward = program(&env, "return 0");
        let out = train(None, &env, &reward, &env.target_goal_spec, &small(1)).unwrap();
        let csv = out.curve_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CurveRow::CSV_HEADER);
        assert_eq!(lines.len(), 6);
    }
}
