use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which score function a request refers to.
///
/// Variables are 0-based. The plain conditional score of variable `i` given
/// the rest is `Conditional { target: i, given: all others }`; a strict subset
/// in `given` drops the remaining variables (used for O-information
/// gradients).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum ScoreTask {
    /// All variables perturbed together.
    Joint,
    /// `target` perturbed, `given` clean, everything else replaced by noise.
    Conditional { target: usize, given: Vec<usize> },
    /// `target` perturbed, everything else replaced by noise.
    Marginal { target: usize },
    /// Joint score of the sub-system without `dropped` (which is replaced by noise).
    SubJoint { dropped: usize },
}

/// Role of one variable within a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Perturbed at the requested time.
    Perturbed,
    /// Passed through unperturbed (τ = 0).
    Clean,
    /// Replaced with pure noise (τ = T).
    Dropped,
}

impl ScoreTask {
    /// Conditional task with a sorted, de-duplicated conditioning set. An
    /// empty conditioning set is the marginal task.
    pub fn conditional(target: usize, given: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut given: Vec<usize> = given.into_iter().collect();
        given.sort_unstable();
        given.dedup();
        if given.contains(&target) {
            return Err(Error::IndexSet(format!(
                "target variable {target} cannot also be conditioned on"
            )));
        }
        if given.is_empty() {
            return Ok(ScoreTask::Marginal { target });
        }
        Ok(ScoreTask::Conditional { target, given })
    }

    /// `Xⁱ | X^{\i}` for a system of `n_vars` variables.
    pub fn conditional_on_rest(target: usize, n_vars: usize) -> Self {
        ScoreTask::Conditional {
            target,
            given: (0..n_vars).filter(|&v| v != target).collect(),
        }
    }

    pub fn validate(&self, n_vars: usize) -> Result<()> {
        let check = |v: usize| {
            if v >= n_vars {
                Err(Error::IndexSet(format!(
                    "variable {v} out of range for {n_vars} variables"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ScoreTask::Joint => Ok(()),
            ScoreTask::Marginal { target } => check(*target),
            ScoreTask::SubJoint { dropped } => {
                check(*dropped)?;
                if n_vars < 2 {
                    return Err(Error::InvalidArgument(
                        "sub-joint task needs at least 2 variables".into(),
                    ));
                }
                Ok(())
            }
            ScoreTask::Conditional { target, given } => {
                check(*target)?;
                for &g in given {
                    check(g)?;
                }
                if given.contains(target) {
                    return Err(Error::IndexSet(format!(
                        "target variable {target} cannot also be conditioned on"
                    )));
                }
                if given.is_empty() {
                    return Err(Error::IndexSet(
                        "conditional task with empty conditioning set; use Marginal".into(),
                    ));
                }
                if given.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::IndexSet("conditioning set must be sorted and unique".into()));
                }
                Ok(())
            }
        }
    }

    pub fn role(&self, var: usize) -> VarRole {
        match self {
            ScoreTask::Joint => VarRole::Perturbed,
            ScoreTask::Marginal { target } => {
                if var == *target {
                    VarRole::Perturbed
                } else {
                    VarRole::Dropped
                }
            }
            ScoreTask::SubJoint { dropped } => {
                if var == *dropped {
                    VarRole::Dropped
                } else {
                    VarRole::Perturbed
                }
            }
            ScoreTask::Conditional { target, given } => {
                if var == *target {
                    VarRole::Perturbed
                } else if given.contains(&var) {
                    VarRole::Clean
                } else {
                    VarRole::Dropped
                }
            }
        }
    }

    pub fn vars_with_role(&self, n_vars: usize, role: VarRole) -> Vec<usize> {
        (0..n_vars).filter(|&v| self.role(v) == role).collect()
    }

    /// Variables whose score this task produces.
    pub fn perturbed_vars(&self, n_vars: usize) -> Vec<usize> {
        self.vars_with_role(n_vars, VarRole::Perturbed)
    }

    pub fn clean_vars(&self, n_vars: usize) -> Vec<usize> {
        self.vars_with_role(n_vars, VarRole::Clean)
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            ScoreTask::Joint => "joint",
            ScoreTask::Conditional { .. } => "conditional",
            ScoreTask::Marginal { .. } => "marginal",
            ScoreTask::SubJoint { .. } => "sub_joint",
        }
    }
}

impl std::fmt::Display for ScoreTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreTask::Joint => write!(f, "joint"),
            ScoreTask::Marginal { target } => write!(f, "marginal[{target}]"),
            ScoreTask::SubJoint { dropped } => write!(f, "joint[without {dropped}]"),
            ScoreTask::Conditional { target, given } => {
                write!(f, "conditional[{target} | {given:?}]")
            }
        }
    }
}

/// Per-variable noise times describing a task to the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauVector(pub Vec<f64>);

/// Joint `[t,…,t]`, conditional `t` at the target and `0` on the conditioning
/// set, marginal `t` at the target; every dropped variable gets `t_max`.
pub fn encode_task(task: &ScoreTask, t: f64, n_vars: usize, t_max: f64) -> Result<TauVector> {
    task.validate(n_vars)?;
    Ok(TauVector(
        (0..n_vars)
            .map(|v| match task.role(v) {
                VarRole::Perturbed => t,
                VarRole::Clean => 0.0,
                VarRole::Dropped => t_max,
            })
            .collect(),
    ))
}
