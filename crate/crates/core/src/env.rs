//! Episodic pulse-sequence environment.
//!
//! An episode starts from the x-polarized coherent spin state, applies one
//! action per interval of length `dt = T / n_t`, and records the QFI after
//! every step. Rewards are assigned once the episode has finished: step `t`
//! receives the largest QFI reached at any step `i >= t`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::{optimal_squeezing_time, qfi_generator_z, ScanGrid};
use crate::spin::{ActionKind, SpinState};

/// Which pulse axes the action pool contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `{Free, PulseX}`
    OnlyX,
    /// `{Free, PulseX, PulseY}`
    BothXy,
}

impl Scheme {
    pub fn actions(self) -> &'static [ActionKind] {
        match self {
            Scheme::OnlyX => &ActionKind::ALL[..2],
            Scheme::BothXy => &ActionKind::ALL,
        }
    }

    pub fn n_actions(self) -> usize {
        self.actions().len()
    }

    pub fn allows(self, action: ActionKind) -> bool {
        self.actions().contains(&action)
    }

    pub fn check(self, action: ActionKind) -> Result<()> {
        if self.allows(action) {
            Ok(())
        } else {
            Err(Error::IllegalAction { action: action.to_string(), scheme: self.to_string() })
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::OnlyX => "only-x",
            Scheme::BothXy => "both-xy",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "only-x" => Ok(Scheme::OnlyX),
            "both-xy" => Ok(Scheme::BothXy),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Preset total evolution times for N = 100 and N = 1000.
pub fn preset_total_time(n_atoms: usize) -> Option<f64> {
    match n_atoms {
        100 => Some(0.13),
        1000 => Some(0.015),
        _ => None,
    }
}

/// Physical parameters of one state-preparation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub n_atoms: usize,
    #[serde(default = "default_chi")]
    pub chi: f64,
    pub total_time: f64,
    #[serde(default = "default_intervals")]
    pub n_intervals: usize,
    pub scheme: Scheme,
    /// Append `t / n_t` to the observation.
    #[serde(default)]
    pub observe_time: bool,
}

fn default_chi() -> f64 {
    1.0
}

fn default_intervals() -> usize {
    50
}

impl PhysicsConfig {
    pub fn new(n_atoms: usize, total_time: f64, scheme: Scheme) -> Self {
        Self {
            n_atoms,
            chi: default_chi(),
            total_time,
            n_intervals: default_intervals(),
            scheme,
            observe_time: false,
        }
    }

    /// Uses the optimal squeezing time of free twisting as the time budget.
    pub fn at_squeezing_time(n_atoms: usize, chi: f64, scheme: Scheme) -> Result<Self> {
        let t = optimal_squeezing_time(n_atoms, chi, &ScanGrid::default())?;
        Ok(Self { chi, ..Self::new(n_atoms, t, scheme) })
    }

    pub fn with_intervals(mut self, n_intervals: usize) -> Self {
        self.n_intervals = n_intervals;
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.n_intervals as f64
    }

    /// Twisting phase per interval, `chi * T / n_t`.
    pub fn chi_dt(&self) -> f64 {
        self.chi * self.dt()
    }

    pub fn obs_dim(&self) -> usize {
        if self.observe_time {
            7
        } else {
            6
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidSystemSize(0));
        }
        if self.n_intervals == 0 {
            return Err(Error::InvalidConfig("n_intervals must be positive".into()));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(Error::InvalidConfig(format!("total_time must be positive (got {})", self.total_time)));
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return Err(Error::InvalidConfig(format!("chi must be positive (got {})", self.chi)));
        }
        Ok(())
    }

    /// Learner input for `state` at step `t`.
    pub fn observe(&self, state: &SpinState, step: usize) -> Vec<f64> {
        let mut obs = state.observation().to_vec();
        if self.observe_time {
            obs.push(step as f64 / self.n_intervals as f64);
        }
        obs
    }
}

/// Supplies one action per interval.
pub trait ActionSource {
    fn choose(&mut self, step: usize, observation: &[f64]) -> Result<ActionKind>;
}

/// Replays a fixed action list.
pub struct FixedActions<'a> {
    actions: &'a [ActionKind],
}

impl<'a> FixedActions<'a> {
    pub fn new(actions: &'a [ActionKind]) -> Self {
        Self { actions }
    }
}

impl ActionSource for FixedActions<'_> {
    fn choose(&mut self, step: usize, _observation: &[f64]) -> Result<ActionKind> {
        self.actions
            .get(step)
            .copied()
            .ok_or(Error::ActionCountMismatch { expected: step + 1, got: self.actions.len() })
    }
}

/// Everything recorded during one episode.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    /// Observation seen before each decision (`n_t` entries).
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<ActionKind>,
    /// `F_Q^(t)` for `t = 0..=n_t`.
    pub qfi_series: Vec<f64>,
    /// Future-max rewards, same length as `qfi_series`.
    pub rewards: Vec<f64>,
    pub final_state: SpinState,
}

impl EpisodeTrace {
    pub fn final_qfi(&self) -> f64 {
        *self.qfi_series.last().expect("qfi series is never empty")
    }

    /// Sum of all step rewards.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.actions.iter().filter(|a| **a != ActionKind::Free).count()
    }
}

/// Runs one episode from the CSS, asking `source` for each action.
pub fn run_episode(config: &PhysicsConfig, source: &mut dyn ActionSource) -> Result<EpisodeTrace> {
    config.validate()?;
    let n_t = config.n_intervals;
    let chi_dt = config.chi_dt();
    let mut state = SpinState::css(config.n_atoms)?;
    let mut observations = Vec::with_capacity(n_t);
    let mut actions = Vec::with_capacity(n_t);
    let mut qfi_series = Vec::with_capacity(n_t + 1);
    qfi_series.push(qfi_generator_z(&state));
    for step in 0..n_t {
        let obs = config.observe(&state, step);
        let action = source.choose(step, &obs)?;
        config.scheme.check(action)?;
        state.apply_action(action, chi_dt);
        observations.push(obs);
        actions.push(action);
        qfi_series.push(qfi_generator_z(&state));
    }
    debug_assert!(state.check_norm().is_ok(), "episode lost normalization");
    let rewards = assign_rewards(&qfi_series);
    Ok(EpisodeTrace { observations, actions, qfi_series, rewards, final_state: state })
}

/// Replays an explicit action list, which must contain exactly `n_t` entries.
pub fn replay(config: &PhysicsConfig, actions: &[ActionKind]) -> Result<EpisodeTrace> {
    if actions.len() != config.n_intervals {
        return Err(Error::ActionCountMismatch { expected: config.n_intervals, got: actions.len() });
    }
    run_episode(config, &mut FixedActions::new(actions))
}

/// `r_t = max_{i in [t, n_t]} F_Q^(i)`.
pub fn assign_rewards(qfi_series: &[f64]) -> Vec<f64> {
    let mut rewards = vec![0.0; qfi_series.len()];
    let mut running = f64::NEG_INFINITY;
    for (r, &q) in rewards.iter_mut().zip(qfi_series).rev() {
        running = running.max(q);
        *r = running;
    }
    rewards
}

/// Rewards divided by `N^2`, so that the Heisenberg limit maps to 1.
pub fn normalized_rewards(rewards: &[f64], n_atoms: usize) -> Vec<f64> {
    let scale = (n_atoms as f64).powi(2);
    rewards.iter().map(|r| r / scale).collect()
}

pub const SEQUENCE_FORMAT_VERSION: u32 = 1;

/// A pulse train together with the physics it was designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub format_version: u32,
    pub n_atoms: usize,
    pub chi: f64,
    pub total_time: f64,
    pub n_intervals: usize,
    pub scheme: Scheme,
    pub actions: Vec<ActionKind>,
}

impl PulseSequence {
    pub fn new(config: &PhysicsConfig, actions: Vec<ActionKind>) -> Self {
        Self {
            format_version: SEQUENCE_FORMAT_VERSION,
            n_atoms: config.n_atoms,
            chi: config.chi,
            total_time: config.total_time,
            n_intervals: config.n_intervals,
            scheme: config.scheme,
            actions,
        }
    }

    pub fn physics(&self) -> PhysicsConfig {
        PhysicsConfig {
            n_atoms: self.n_atoms,
            chi: self.chi,
            total_time: self.total_time,
            n_intervals: self.n_intervals,
            scheme: self.scheme,
            observe_time: false,
        }
    }

    /// Same pulse train, different atom number.
    pub fn physics_for(&self, n_atoms: usize) -> PhysicsConfig {
        PhysicsConfig { n_atoms, ..self.physics() }
    }

    pub fn chi_dt(&self) -> f64 {
        self.physics().chi_dt()
    }

    pub fn pulse_count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| **a == kind).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SEQUENCE_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported sequence format version {}",
                self.format_version
            )));
        }
        self.physics().validate()?;
        if self.actions.len() != self.n_intervals {
            return Err(Error::ActionCountMismatch { expected: self.n_intervals, got: self.actions.len() });
        }
        self.actions.iter().try_for_each(|&a| self.scheme.check(a))
    }

    /// Prepares `|psi>_T` on a system of `n_atoms` atoms.
    pub fn prepare(&self, n_atoms: usize) -> Result<SpinState> {
        let mut state = SpinState::css(n_atoms)?;
        let chi_dt = self.chi_dt();
        for &a in &self.actions {
            state.apply_action(a, chi_dt);
        }
        Ok(state)
    }

    pub fn replay(&self) -> Result<EpisodeTrace> {
        replay(&self.physics(), &self.actions)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let seq: Self = serde_json::from_str(text)?;
        seq.validate()?;
        Ok(seq)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::CollectiveAxis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn cfg(n: usize, t: f64, n_t: usize, scheme: Scheme) -> PhysicsConfig {
        PhysicsConfig::new(n, t, scheme).with_intervals(n_t)
    }

    #[test]
    fn rewards_examples() {
        assert_eq!(assign_rewards(&[1.0, 3.0, 2.0, 5.0, 4.0]), vec![5.0, 5.0, 5.0, 5.0, 4.0]);
        assert_eq!(assign_rewards(&[2.5; 4]), vec![2.5; 4]);
        assert_eq!(assign_rewards(&[7.0]), vec![7.0]);
    }

    #[test]
    fn rewards_never_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let len = rng.random_range(1..60);
            let series: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 100.0).collect();
            let r = assign_rewards(&series);
            assert!(r.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(*r.last().unwrap(), *series.last().unwrap());
        }
    }

    #[test]
    fn normalized_reward_examples() {
        let n = 40;
        let nf = n as f64;
        let r = normalized_rewards(&[nf, nf * nf], n);
        assert!((r[0] - 1.0 / nf).abs() < 1e-15);
        assert!((r[1] - 1.0).abs() < 1e-15);
        let raw = [0.3, 0.9, 0.1];
        let scaled: Vec<f64> = raw.iter().map(|x| x * nf * nf).collect();
        let back = normalized_rewards(&scaled, n);
        for (a, b) in raw.iter().zip(back) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn all_free_matches_direct_twisting() {
        let c = cfg(30, 0.2, 10, Scheme::OnlyX);
        let trace = replay(&c, &[ActionKind::Free; 10]).unwrap();
        for (t, q) in trace.qfi_series.iter().enumerate() {
            let mut direct = SpinState::css(30).unwrap();
            direct.apply_oat(c.chi * c.total_time * t as f64 / 10.0);
            assert!((q - qfi_generator_z(&direct)).abs() < 1e-9 * q, "step {t}");
        }
        let mut direct = SpinState::css(30).unwrap();
        direct.apply_oat(c.chi * c.total_time);
        assert!(trace.final_state.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn showcase_episode_runs_to_completion() {
        let c = PhysicsConfig::new(100, 0.13, Scheme::OnlyX);
        let mut actions = vec![ActionKind::Free; 50];
        actions[10] = ActionKind::PulseX;
        actions[49] = ActionKind::PulseX;
        let trace = replay(&c, &actions).unwrap();
        assert_eq!(trace.actions.len(), 50);
        assert_eq!(trace.observations.len(), 50);
        assert_eq!(trace.qfi_series.len(), 51);
        assert!((trace.qfi_series[0] - 100.0).abs() < 1e-9);
        assert!(trace.rewards.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn replay_is_deterministic() {
        let c = cfg(25, 0.15, 12, Scheme::BothXy);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actions: Vec<ActionKind> = (0..12).map(|_| ActionKind::ALL[rng.random_range(0..3)]).collect();
        let a = replay(&c, &actions).unwrap();
        let b = replay(&c, &actions).unwrap();
        assert_eq!(a.qfi_series, b.qfi_series);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn only_x_rejects_y_pulses() {
        let c = cfg(10, 0.2, 3, Scheme::OnlyX);
        let err = replay(&c, &[ActionKind::Free, ActionKind::PulseY, ActionKind::Free]).unwrap_err();
        assert!(matches!(err, Error::IllegalAction { .. }));
    }

    #[test]
    fn wrong_action_count_rejected() {
        let c = cfg(10, 0.2, 3, Scheme::OnlyX);
        assert!(matches!(replay(&c, &[ActionKind::Free; 2]), Err(Error::ActionCountMismatch { .. })));
    }

    #[test]
    fn single_interval_pulse_composition() {
        let c = cfg(16, 0.3, 1, Scheme::OnlyX);
        let trace = replay(&c, &[ActionKind::PulseX]).unwrap();
        let mut direct = SpinState::css(16).unwrap();
        direct.apply_oat(0.3);
        direct.apply_rotation(CollectiveAxis::X, FRAC_PI_2);
        assert!(trace.final_state.max_abs_diff(&direct) < 1e-13);
    }

    #[test]
    fn observation_with_time_flag() {
        let mut c = cfg(10, 0.2, 4, Scheme::OnlyX);
        c.observe_time = true;
        let trace = replay(&c, &[ActionKind::Free; 4]).unwrap();
        assert!(trace.observations.iter().all(|o| o.len() == 7));
        assert_eq!(trace.observations[2][6], 0.5);
    }

    #[test]
    fn sequence_file_round_trip_and_validation() {
        let c = cfg(12, 0.1, 3, Scheme::BothXy);
        let seq = PulseSequence::new(&c, vec![ActionKind::Free, ActionKind::PulseY, ActionKind::PulseX]);
        let text = seq.to_json().unwrap();
        assert!(text.contains("\"scheme\": \"both-xy\""));
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(PulseSequence::from_json(&text).unwrap(), seq);

        let bad = text.replace("both-xy", "only-x");
        assert!(matches!(PulseSequence::from_json(&bad), Err(Error::IllegalAction { .. })));
        let bad_code = r#"{"format_version":1,"n_atoms":4,"chi":1.0,"total_time":0.1,
            "n_intervals":1,"scheme":"only-x","actions":[5]}"#;
        assert!(PulseSequence::from_json(bad_code).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("only-x".parse::<Scheme>().unwrap(), Scheme::OnlyX);
        assert_eq!("both-xy".parse::<Scheme>().unwrap(), Scheme::BothXy);
        assert!("xy".parse::<Scheme>().is_err());
        assert_eq!(Scheme::OnlyX.n_actions(), 2);
    }
}
