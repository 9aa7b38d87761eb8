use serde::{Deserialize, Serialize};

use super::parse::TaskSpec;
use super::{ChatRequest, LlmError, Message, Role};
use crate::dsl::{GOAL_FENCE, GRAMMAR_CARD, REWARD_FENCE};
use crate::env::{EnvironmentDefinition, TerminateOn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub model: String,
    pub curriculum_temperature: f64,
    pub task_code_temperature: f64,
    pub evaluation_temperature: f64,
    /// Upper bound on the characters spent on previous tasks; the oldest go first.
    pub history_char_budget: usize,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            model: "scripted".into(),
            curriculum_temperature: 1.0,
            task_code_temperature: 1.0,
            evaluation_temperature: 0.0,
            history_char_budget: 6000,
        }
    }
}

/// A learned subtask and the task code that was selected for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub task: TaskSpec,
    pub code: String,
}

const CURRICULUM_SYSTEM: &str = "\
You design training curricula for reinforcement learning agents. A curriculum is an ordered \
list of tasks that starts with something the agent can learn from scratch and ends with the \
original task. Every task is trained starting from the policy of the task before it.";

const CURRICULUM_USER: &str = "\
Environment:
<<Env>>

Write a curriculum that leads to the target task above.
Rules:
- Describe each task with the goal distribution dimensions listed above, giving concrete ranges.
- Keep the tasks few; never write more than 5.
- Each task should be a small step up from the previous one.
- The last task must be the original target task with its exact goal distribution.

Use exactly this format for every task:
Task 1
Name: [task name]
Description: [what is trained and the goal ranges]
Reason: [why this step helps]";

const TASK_CODE_SYSTEM: &str = "\
You write reward functions and goal distributions for a reinforcement learning agent. The \
policy is trained to maximize the discounted sum of your reward over each episode.";

const TASK_CODE_USER: &str = "\
Environment:
<<Env>>

Reward language:
<<Grammar>>

Task to train now:
Name: <<Task_Name>>
Description: <<Task_Description>>
Reason: <<Task_Reason>>
<<History>>
Tips:
- Put more weight on the reward term for the current task than on helper terms.
- Keep the reward smooth so small improvements are rewarded.
- Choose goal ranges that match the task description; dimensions you omit use the target range.

Answer with two fenced blocks and nothing else needed:
```<<Reward_Fence>>
# reward program
return ...
```
```<<Goal_Fence>>
dimension_name: [low, high]
```";

const HISTORY_HEADER: &str = "
Previous learned task (most recent first; the policy you train starts from the first one):
";

const HISTORY_ENTRY: &str = "\
Name: <<Task_Name>>
Description: <<Task_Description>>
Reason: <<Task_Reason>>
Task code:
<<Task_Code>>
";

const EVALUATION_SYSTEM: &str = "\
You compare agents trained with different reward functions and pick the one whose behaviour \
best fits a task.";

const EVALUATION_USER: &str = "\
Find the agent that best fits the task below.

Task Name: <<Task_Name>>
Description: <<Task_Description>>
Reason: <<Task_Reason>>
<<History>>
Each block reports the mean of every state variable over the agent's rollouts, the mean \
episode length and the fraction of episodes that reached the goal.

<<Summaries>>

<<Guidance>>

Reply in this format:
Decision: Agent [number]
Reason: [why]";

const GUIDANCE_SUCCESS: &str = "\
Episodes end as soon as the goal is reached, so a short episode is good when success_rate is \
high. Prefer agents whose statistics match the task and whose success_rate is high.";

const GUIDANCE_FAILURE: &str = "\
Episodes end early when the agent fails, so a short episode length signals an unhealthy policy. \
Prefer agents whose statistics match the task and whose episodes last long.";

/// Replaces `<<Key>>` markers in one pass, so substituted text is never re-expanded.
fn expand(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(start) = rest.find("<<") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find(">>") {
            Some(end) if values.iter().any(|(k, _)| *k == &after[..end]) => {
                let key = &after[..end];
                out.push_str(values.iter().find(|(k, _)| *k == key).unwrap().1);
                rest = &after[end + 2..];
            }
            _ => {
                out.push_str("<<");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn require(value: &str, field: &'static str) -> Result<(), LlmError> {
    if value.trim().is_empty() {
        Err(LlmError::MissingContextField(field))
    } else {
        Ok(())
    }
}

fn check_task(task: &TaskSpec) -> Result<(), LlmError> {
    require(&task.name, "task.name")?;
    require(&task.description, "task.description")?;
    require(&task.reason, "task.reason")
}

fn task_values(task: &TaskSpec) -> [(&'static str, &str); 3] {
    [
        ("Task_Name", task.name.as_str()),
        ("Task_Description", task.description.as_str()),
        ("Task_Reason", task.reason.as_str()),
    ]
}

/// Most recent first; drops the oldest entries once `budget` characters are used.
/// The most recent entry is always kept.
fn render_history(history: &[HistoryItem], budget: usize) -> String {
    if history.is_empty() {
        return String::new();
    }
    let mut out = String::from(HISTORY_HEADER);
    let mut used = 0;
    for (i, item) in history.iter().rev().enumerate() {
        let [a, b, c] = task_values(&item.task);
        let entry = expand(HISTORY_ENTRY, &[a, b, c, ("Task_Code", item.code.trim_end())]);
        if i > 0 && used + entry.len() > budget {
            break;
        }
        used += entry.len();
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&entry);
    }
    out
}

fn request(settings: &PromptSettings, system: &str, user: String, temperature: f64, n: usize) -> Result<ChatRequest, LlmError> {
    require(&settings.model, "model")?;
    let req = ChatRequest {
        model: settings.model.clone(),
        messages: vec![
            Message {
                role: Role::System,
                content: system.to_string(),
            },
            Message {
                role: Role::User,
                content: user,
            },
        ],
        temperature,
        candidate_count: n,
    };
    req.validate()?;
    Ok(req)
}

pub fn curriculum_request(env: &EnvironmentDefinition, settings: &PromptSettings) -> Result<ChatRequest, LlmError> {
    require(&env.env_description, "env_description")?;
    require(&env.target_description, "target_description")?;
    let user = expand(CURRICULUM_USER, &[("Env", env.describe().trim_end())]);
    request(settings, CURRICULUM_SYSTEM, user, settings.curriculum_temperature, 1)
}

/// Asks for `n` task codes for `task`; `history` is oldest first.
pub fn task_code_request(
    env: &EnvironmentDefinition,
    task: &TaskSpec,
    history: &[HistoryItem],
    settings: &PromptSettings,
    n: usize,
) -> Result<ChatRequest, LlmError> {
    require(&env.env_description, "env_description")?;
    check_task(task)?;
    let hist = render_history(history, settings.history_char_budget);
    let env_text = env.describe();
    let [a, b, c] = task_values(task);
    let user = expand(
        TASK_CODE_USER,
        &[
            ("Env", env_text.trim_end()),
            ("Grammar", GRAMMAR_CARD),
            a,
            b,
            c,
            ("History", &hist),
            ("Reward_Fence", REWARD_FENCE),
            ("Goal_Fence", GOAL_FENCE),
        ],
    );
    request(settings, TASK_CODE_SYSTEM, user, settings.task_code_temperature, n)
}

/// `rendered` is the output of `render_summaries` for the surviving candidates.
pub fn evaluation_request(
    env: &EnvironmentDefinition,
    task: &TaskSpec,
    history: &[HistoryItem],
    rendered: &str,
    settings: &PromptSettings,
) -> Result<ChatRequest, LlmError> {
    check_task(task)?;
    require(rendered, "summaries")?;
    let hist = render_history(history, settings.history_char_budget);
    let guidance = match env.terminate_on {
        TerminateOn::Success => GUIDANCE_SUCCESS,
        TerminateOn::Failure => GUIDANCE_FAILURE,
    };
    let [a, b, c] = task_values(task);
    let user = expand(
        EVALUATION_USER,
        &[a, b, c, ("History", &hist), ("Summaries", rendered.trim_end()), ("Guidance", guidance)],
    );
    request(settings, EVALUATION_SYSTEM, user, settings.evaluation_temperature, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::point_maze;

    fn task(name: &str) -> TaskSpec {
        TaskSpec {
            index: 1,
            name: name.into(),
            description: format!("{name} description"),
            reason: format!("{name} reason"),
        }
    }

    fn item(name: &str, code: &str) -> HistoryItem {
        HistoryItem {
            task: task(name),
            code: code.into(),
        }
    }

    #[test]
    fn expand_is_single_pass() {
        let s = expand("<<A>> and <<B>> <<C>>", &[("A", "<<B>>"), ("B", "b")]);
        assert_eq!(s, "<<B>> and b <<C>>");
        assert_eq!(expand("a << b >> <<", &[("A", "x")]), "a << b >> <<");
    }

    #[test]
    fn curriculum_prompt_names_every_variable() {
        let env = point_maze();
        let req = curriculum_request(&env, &PromptSettings::default()).unwrap();
        let text = req.transcript();
        for v in &env.variables {
            assert!(text.contains(&v.name), "{}", v.name);
        }
        assert!(text.contains(env.target_goal_spec.to_lines().trim()));
        assert_eq!(req, curriculum_request(&env, &PromptSettings::default()).unwrap());
    }

    #[test]
    fn task_code_history_section() {
        let env = point_maze();
        let s = PromptSettings::default();
        let req = task_code_request(&env, &task("Near"), &[], &s, 4).unwrap();
        assert!(!req.transcript().contains("Previous learned task"));
        assert!(!req.transcript().contains("<<"));
        assert_eq!(req.candidate_count, 4);

        let hist = [item("First", "return 1"), item("Second", "return 2")];
        let text = task_code_request(&env, &task("Third"), &hist, &s, 4).unwrap().transcript();
        assert!(text.contains("Previous learned task"));
        let second = text.find("Name: Second").unwrap();
        let first = text.find("Name: First").unwrap();
        assert!(second < first, "most recent first");
        assert!(text.contains("Task code:\nreturn 2"));
    }

    #[test]
    fn history_truncates_oldest_first() {
        let env = point_maze();
        let s = PromptSettings {
            history_char_budget: 150,
            ..PromptSettings::default()
        };
        let hist = [item("Old", &"x".repeat(100)), item("New", &"y".repeat(100))];
        let text = task_code_request(&env, &task("Now"), &hist, &s, 1).unwrap().transcript();
        assert!(text.contains("Name: New"));
        assert!(!text.contains("Name: Old"));
    }

    #[test]
    fn evaluation_prompt_contains_blocks() {
        let env = point_maze();
        let rendered = "Agent 0:\nx: [0.000]\n\nAgent 1:\nx: [1.000]";
        let req = evaluation_request(&env, &task("T"), &[], rendered, &PromptSettings::default()).unwrap();
        assert!(req.transcript().contains("Agent 1:\nx: [1.000]"));
        assert!(req.transcript().contains("Decision: Agent [number]"));
        assert_eq!(req.temperature, 0.0);
    }

    #[test]
    fn missing_context() {
        let env = point_maze();
        let mut t = task("T");
        t.description.clear();
        assert_eq!(
            task_code_request(&env, &t, &[], &PromptSettings::default(), 1),
            Err(LlmError::MissingContextField("task.description"))
        );
        assert_eq!(
            evaluation_request(&env, &task("T"), &[], " ", &PromptSettings::default()),
            Err(LlmError::MissingContextField("summaries"))
        );
        let s = PromptSettings {
            model: String::new(),
            ..PromptSettings::default()
        };
        assert_eq!(curriculum_request(&env, &s), Err(LlmError::MissingContextField("model")));
    }
}
