use rand::Rng;

use super::{ParamMap, PlanContext, PlanError, Planner, PlannerOutput};
use crate::collision::validate_segment;
use crate::kinematics::{indexed_rng, sample_variables};

pub const DEFAULT_GOAL_BIAS: f64 = 0.05;

/// Goal-biased RRT in the group's joint space.
#[derive(Clone, Debug, PartialEq)]
pub struct Rrt {
    pub goal_bias: f64,
    /// Extension length as a fraction of the space extent; the collision
    /// resolution when unset.
    pub step_fraction: Option<f64>,
}

impl Default for Rrt {
    fn default() -> Self {
        Rrt {
            goal_bias: DEFAULT_GOAL_BIAS,
            step_fraction: None,
        }
    }
}

impl Rrt {
    pub fn from_params(params: &ParamMap) -> Result<Rrt, PlanError> {
        let mut r = Rrt::default();
        for (k, &v) in params {
            match k.as_str() {
                "goal_bias" if (0.0..=1.0).contains(&v) => r.goal_bias = v,
                "step_fraction" if v > 0.0 && v < 1.0 => r.step_fraction = Some(v),
                "goal_bias" | "step_fraction" => {
                    return Err(PlanError::InvalidRequest(format!("rrt parameter {k} out of range: {v}")))
                }
                _ => return Err(PlanError::InvalidRequest(format!("unknown rrt parameter `{k}`"))),
            }
        }
        Ok(r)
    }
}

struct Node {
    q: Vec<f64>,
    parent: usize,
}

impl Planner for Rrt {
    fn solve(&self, ctx: &PlanContext) -> Result<PlannerOutput, PlanError> {
        let group = ctx.group;
        let vars = group.variables();
        let start = ctx.start.to_vec();
        let goal = ctx.goal.to_vec();
        let mut out = PlannerOutput::default();
        if group.distance(&start, &goal) == 0.0 {
            out.path = vec![start];
            return Ok(out);
        }
        let step = self.step_fraction.map_or(ctx.resolution_step, |f| f * ctx.extent);
        let edge = |a: &[f64], b: &[f64], out: &mut PlannerOutput| {
            let m = validate_segment(ctx.validator, group, a, b, ctx.edge_check_step, true);
            out.checks_performed += m.checks_performed;
            m.valid
        };

        let mut rng = indexed_rng(ctx.seed, 0);
        let mut tree = vec![Node { q: start, parent: 0 }];
        let mut sample = ctx.start.to_vec();
        let mut q_new = ctx.start.to_vec();
        loop {
            if ctx.expired() {
                return Err(PlanError::Timeout {
                    budget_s: ctx.budget_s,
                    checks_performed: out.checks_performed,
                });
            }
            out.iterations += 1;
            if rng.random::<f64>() < self.goal_bias {
                sample.copy_from_slice(&goal);
            } else {
                sample_variables(ctx.model, vars, &mut rng, &mut sample)?;
            }
            let (near, d) = tree
                .iter()
                .enumerate()
                .map(|(i, n)| (i, group.distance(&n.q, &sample)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("tree has a root");
            if d == 0.0 {
                continue;
            }
            let f = (step / d).min(1.0);
            for &i in vars {
                let a = tree[near].q[i];
                q_new[i] = a + f * (sample[i] - a);
            }
            if !edge(&tree[near].q, &q_new, &mut out) {
                continue;
            }
            tree.push(Node {
                q: q_new.clone(),
                parent: near,
            });
            let last = tree.len() - 1;
            let dg = group.distance(&q_new, &goal);
            let connected = dg <= step && (dg == 0.0 || edge(&q_new, &goal, &mut out));
            if connected || dg <= ctx.goal_tolerance {
                let mut path = Vec::new();
                if connected {
                    path.push(goal.clone());
                }
                if dg > 0.0 || !connected {
                    path.push(q_new.clone());
                }
                let mut i = last;
                while i != 0 {
                    i = tree[i].parent;
                    path.push(tree[i].q.clone());
                }
                path.reverse();
                out.path = path;
                out.tree_size = tree.len();
                return Ok(out);
            }
        }
    }
}
