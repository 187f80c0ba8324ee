//! Numeric-text checkpoints.
//!
//! ```text
//! qfi-pulse-checkpoint 1
//! scheme both-xy
//! actions 3
//! actor 6 64 64 3
//! critic 6 64 64 1
//! adam actor <step> <lr> <beta1> <beta2> <epsilon>
//! adam critic <step> <lr> <beta1> <beta2> <epsilon>
//! section actor.params <count>
//! <one value per line>
//! ...
//! ```
//!
//! Sections follow in the order `actor.params`, `critic.params`,
//! `actor.m`, `actor.v`, `critic.m`, `critic.v`. Values use the shortest
//! round-trip decimal form, so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::{ActorCritic, AdamState, Head, Mlp};
use crate::env::Scheme;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "qfi-pulse-checkpoint";
const SECTIONS: [&str; 6] = ["actor.params", "critic.params", "actor.m", "actor.v", "critic.m", "critic.v"];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub nets: ActorCritic,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
}

fn dims_line(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

fn adam_line(name: &str, a: &AdamState) -> String {
    format!("adam {name} {} {} {} {} {}", a.step_count, a.learning_rate, a.beta1, a.beta2, a.epsilon)
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let nets = &self.nets;
        let _ = writeln!(s, "{MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "scheme {}", nets.scheme);
        let _ = writeln!(s, "actions {}", nets.scheme.n_actions());
        let _ = writeln!(s, "actor {}", dims_line(nets.actor.dims()));
        let _ = writeln!(s, "critic {}", dims_line(nets.critic.dims()));
        let _ = writeln!(s, "{}", adam_line("actor", &self.actor_adam));
        let _ = writeln!(s, "{}", adam_line("critic", &self.critic_adam));
        let blocks: [&[f64]; 6] = [
            nets.actor.params(),
            nets.critic.params(),
            &self.actor_adam.first_moment,
            &self.actor_adam.second_moment,
            &self.critic_adam.first_moment,
            &self.critic_adam.second_moment,
        ];
        for (name, block) in SECTIONS.iter().zip(blocks) {
            let _ = writeln!(s, "section {name} {}", block.len());
            for x in block {
                let _ = writeln!(s, "{x:?}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("unexpected end of file, expected {what}")));

        let (ln, header) = next("header")?;
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("line {ln}: not a checkpoint header")))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let field = |(ln, line): (usize, &str), key: &str| -> Result<Vec<String>> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(format!("line {ln}: expected `{key}`")));
            }
            Ok(it.map(str::to_owned).collect())
        };
        let parse = |ln: usize, tok: &str| -> Result<f64> {
            tok.parse::<f64>().map_err(|_| bad(format!("line {ln}: bad number `{tok}`")))
        };
        let parse_dims = |ln: usize, toks: Vec<String>| -> Result<Vec<usize>> {
            let dims = toks
                .iter()
                .map(|t| t.parse::<usize>().map_err(|_| bad(format!("line {ln}: bad width `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if dims.len() < 2 || dims.contains(&0) {
                return Err(bad(format!("line {ln}: invalid layer widths")));
            }
            Ok(dims)
        };

        let l = next("scheme")?;
        let scheme: Scheme = field(l, "scheme")?
            .first()
            .ok_or_else(|| bad("missing scheme".into()))?
            .parse()
            .map_err(|_| bad(format!("line {}: unknown scheme", l.0)))?;
        let l = next("actions")?;
        let n_actions: usize = field(l, "actions")?
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(format!("line {}: bad action count", l.0)))?;
        if n_actions != scheme.n_actions() {
            return Err(bad(format!("action count {n_actions} does not match scheme {scheme}")));
        }
        let l = next("actor dims")?;
        let actor_dims = parse_dims(l.0, field(l, "actor")?)?;
        let l = next("critic dims")?;
        let critic_dims = parse_dims(l.0, field(l, "critic")?)?;
        if *actor_dims.last().unwrap() != n_actions || *critic_dims.last().unwrap() != 1 {
            return Err(bad("output widths do not match the heads".into()));
        }
        if actor_dims[0] != critic_dims[0] {
            return Err(bad("actor and critic input widths differ".into()));
        }

        let mut adams = Vec::new();
        for name in ["actor", "critic"] {
            let l = next("adam line")?;
            let toks = field(l, "adam")?;
            if toks.len() != 6 || toks[0] != name {
                return Err(bad(format!("line {}: malformed adam {name} line", l.0)));
            }
            let step = toks[1].parse::<u64>().map_err(|_| bad(format!("line {}: bad step count", l.0)))?;
            let nums = toks[2..].iter().map(|t| parse(l.0, t)).collect::<Result<Vec<_>>>()?;
            adams.push((step, nums));
        }

        let mut blocks = Vec::new();
        for name in SECTIONS {
            let l = next("section header")?;
            let toks = field(l, "section")?;
            if toks.len() != 2 || toks[0] != name {
                return Err(bad(format!("line {}: expected section {name}", l.0)));
            }
            let count: usize = toks[1].parse().map_err(|_| bad(format!("line {}: bad count", l.0)))?;
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                let (ln, tok) = next("value")?;
                v.push(parse(ln, tok)?);
            }
            blocks.push(v);
        }
        let mut blocks = blocks.into_iter();
        let mut take = || blocks.next().unwrap();
        let actor = Mlp::from_params(&actor_dims, Head::Softmax, take())
            .ok_or_else(|| bad("actor parameter count does not match its shape".into()))?;
        let critic = Mlp::from_params(&critic_dims, Head::Linear, take())
            .ok_or_else(|| bad("critic parameter count does not match its shape".into()))?;
        let mut build = |(step, nums): (u64, Vec<f64>), n: usize| -> Result<AdamState> {
            let (m, v) = (take(), take());
            if m.len() != n || v.len() != n {
                return Err(bad("optimizer moments do not match parameter count".into()));
            }
            Ok(AdamState {
                first_moment: m,
                second_moment: v,
                step_count: step,
                learning_rate: nums[0],
                beta1: nums[1],
                beta2: nums[2],
                epsilon: nums[3],
            })
        };
        let mut adams = adams.into_iter();
        let actor_adam = build(adams.next().unwrap(), actor.params().len())?;
        let critic_adam = build(adams.next().unwrap(), critic.params().len())?;
        Ok(Self { nets: ActorCritic { actor, critic, scheme }, actor_adam, critic_adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
