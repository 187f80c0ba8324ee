use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use qfi_pulse::a3c::checkpoint::Checkpoint;
use qfi_pulse::a3c::{greedy_rollout, train};
use qfi_pulse::config::RunConfig;
use qfi_pulse::env::{PulseSequence, Scheme};
use qfi_pulse::experiments::{
    brute_force_oracle, default_deviation_grid, default_oracle_budget, nt_scan, robustness_sweep, scaling_study,
    sequence_from_index,
};
use qfi_pulse::interferometer::{delta_phi, evaluate_sequence, mean_jz, Protocol, DEFAULT_PHI0};
use qfi_pulse::io::{write_atomic, write_csv};
use qfi_pulse::metrology::{optimal_squeezing_time, ScanGrid};
use qfi_pulse::{Error, Result};

#[derive(Parser)]
#[command(name = "qfi-pulse", version, about = "Pulse-sequence search and Ramsey validation for one-axis twisting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration; flags below override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    n_atoms: Option<usize>,
    #[arg(long, global = true)]
    chi: Option<f64>,
    /// Episode duration T; defaults to the optimal squeezing time of N
    #[arg(long, global = true)]
    total_time: Option<f64>,
    #[arg(long, global = true)]
    n_intervals: Option<usize>,
    /// only-x | both-xy
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the actor-critic and save the best sequence
    #[command(after_help = "\
Outputs (prefix train_<scheme>_N<n>_seed<s>):
  _config.json    run configuration snapshot
  _sequence.json  best pulse sequence
  _log.csv        episode,worker,episode_seed,final_qfi,best_qfi,total_reward,pulses,actor_loss,critic_loss,params_version
  _trace.csv      step,action,qfi,reward   (replay of the best sequence; step 0 is the initial state)
  _final.ckpt     network checkpoint after the last update
  _best.ckpt      network parameters that produced the best episode")]
    Train(Common),
    /// Greedy rollout of a checkpointed policy
    #[command(after_help = "\
Outputs (prefix rollout_<scheme>_N<n>):
  _config.json, _sequence.json
  _trace.csv      step,action,qfi,reward")]
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Exhaustive search over every action string
    #[command(after_help = "\
Outputs (prefix oracle_<scheme>_N<n>_nt<n_t>):
  _config.json, _sequence.json
  _table.csv      index,actions,final_qfi   (actions as digits: 0 free, 1 x-pulse, 2 y-pulse)")]
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Maximum number of sequences; defaults to 2^14 (only-x) or 3^9 (both-xy)
        #[arg(long)]
        max_sequences: Option<u128>,
    },
    /// Time-reversal Ramsey readout of a stored sequence
    #[command(after_help = "\
Outputs (prefix ramsey_<scheme>_N<n>):
  _config.json
  _result.csv     n_atoms,phi,mean_jz,var_jz,slope,delta_phi,qfi,qfi_inv_sqrt
  _fringe.csv     phi,mean_jz   (only with --fringe-points)")]
    Ramsey {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PHI0)]
        phi0: f64,
        /// Sample <J_z>(phi) at this many points over [-pi/N, pi/N]
        #[arg(long)]
        fringe_points: Option<usize>,
    },
    /// Replay a stored sequence on atom numbers within +-20% of training
    #[command(after_help = "\
Outputs (prefix sweep_<scheme>_N<n_train>):
  _config.json
  _table.csv      factor,n_actual,qfi,qfi_inv_sqrt,delta_phi,relative_degradation")]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sequence: PathBuf,
        /// Comma-separated factors of N_train; default 0.80,0.85,...,1.20
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Train every N (best of several seeds) and fit power laws; T = T_os(N) unless --total-time is set
    #[command(after_help = "\
Outputs (prefix scaling_<scheme>):
  _config.json
  _table.csv      n_atoms,scheme,seed,total_time,qfi,qfi_inv_sqrt,delta_phi,pulses
  _fit.json       power-law fits y = a N^-b for 1/F_Q and delta_phi
  _N<n>_sequence.json for every N")]
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,20,50,100,200,500,1000")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
    /// Best-of-seeds F_Q for several interval counts at one N
    #[command(name = "nt-scan", after_help = "\
Outputs (prefix ntscan_<scheme>_N<n>):
  _config.json
  _table.csv      n_intervals,seed,qfi,qfi_over_n2,pulses")]
    NtScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,50,70,100")]
        nts: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
}

fn set(obj: &mut Value, path: &[&str], v: Value) {
    let mut cur = obj;
    for key in &path[..path.len() - 1] {
        if !cur.get(*key).is_some_and(Value::is_object) {
            cur[*key] = json!({});
        }
        cur = &mut cur[*key];
    }
    cur[path[path.len() - 1]] = v;
}

impl Common {
    /// Config file, then flag overrides, then the squeezing-time default for T.
    fn resolve(&self) -> Result<RunConfig> {
        let mut v: Value = match &self.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => json!({ "physics": {} }),
        };
        if let Some(x) = self.n_atoms {
            set(&mut v, &["physics", "n_atoms"], json!(x));
        }
        if let Some(x) = self.chi {
            set(&mut v, &["physics", "chi"], json!(x));
        }
        if let Some(x) = self.total_time {
            set(&mut v, &["physics", "total_time"], json!(x));
        }
        if let Some(x) = self.n_intervals {
            set(&mut v, &["physics", "n_intervals"], json!(x));
        }
        if let Some(x) = self.scheme {
            set(&mut v, &["physics", "scheme"], serde_json::to_value(x)?);
        }
        if let Some(x) = self.seed {
            set(&mut v, &["seed"], json!(x));
        }
        if let Some(x) = self.workers {
            set(&mut v, &["workers"], json!(x));
        }
        if let Some(x) = self.episodes {
            set(&mut v, &["episodes"], json!(x));
        }
        if let Some(x) = &self.out {
            set(&mut v, &["out_dir"], json!(x));
        }
        if v["physics"].get("n_atoms").is_none() {
            set(&mut v, &["physics", "n_atoms"], json!(100));
        }
        if v["physics"].get("scheme").is_none() {
            set(&mut v, &["physics", "scheme"], json!("only-x"));
        }
        if v["physics"].get("total_time").is_none() {
            let n = v["physics"]["n_atoms"]
                .as_u64()
                .ok_or_else(|| Error::InvalidConfig("n_atoms must be a positive integer".into()))?;
            let chi = v["physics"].get("chi").and_then(Value::as_f64).unwrap_or(1.0);
            let t = optimal_squeezing_time(n as usize, chi, &ScanGrid::default())?;
            set(&mut v, &["physics", "total_time"], json!(t));
        }
        let cfg: RunConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_file(cfg: &RunConfig, prefix: &str, suffix: &str) -> PathBuf {
    cfg.out_dir.join(format!("{prefix}_{suffix}"))
}

fn snapshot(cfg: &RunConfig, prefix: &str, extra: Value) -> Result<()> {
    let mut v = serde_json::to_value(cfg)?;
    if let Value::Object(m) = extra {
        for (k, x) in m {
            v[k] = x;
        }
    }
    write_atomic(&out_file(cfg, prefix, "config.json"), serde_json::to_string_pretty(&v)?.as_bytes())
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    action: String,
    qfi: f64,
    reward: f64,
}

fn write_trace(path: &Path, seq: &PulseSequence) -> Result<()> {
    let trace = seq.replay()?;
    let rows: Vec<TraceRow> = (0..trace.qfi_series.len())
        .map(|t| TraceRow {
            step: t,
            action: if t == 0 { String::new() } else { trace.actions[t - 1].to_string() },
            qfi: trace.qfi_series[t],
            reward: trace.rewards[t],
        })
        .collect();
    write_csv(path, &rows)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let p = &cfg.physics;
            let prefix = format!("train_{}_N{}_seed{}", p.scheme, p.n_atoms, cfg.seed);
            snapshot(&cfg, &prefix, json!({}))?;
            let out = train(&cfg)?;
            out.best.save(&out_file(&cfg, &prefix, "sequence.json"))?;
            write_csv(&out_file(&cfg, &prefix, "log.csv"), &out.log.records)?;
            write_trace(&out_file(&cfg, &prefix, "trace.csv"), &out.best)?;
            let (actor_adam, critic_adam) = out.final_adam;
            Checkpoint { nets: out.final_nets, actor_adam, critic_adam }.save(&out_file(&cfg, &prefix, "final.ckpt"))?;
            // Moments are not tracked per episode; the best-episode checkpoint carries a fresh optimizer.
            let (n_a, n_c) = (out.best_nets.actor.params().len(), out.best_nets.critic.params().len());
            Checkpoint {
                nets: out.best_nets,
                actor_adam: cfg.trainer.adam_state(n_a, cfg.trainer.actor_lr),
                critic_adam: cfg.trainer.adam_state(n_c, cfg.trainer.critic_lr),
            }
            .save(&out_file(&cfg, &prefix, "best.ckpt"))?;
            let n2 = (p.n_atoms * p.n_atoms) as f64;
            println!(
                "best F_Q = {:.6} (F_Q/N^2 = {:.4}), greedy F_Q = {:.6}, {} episodes in {:.1} s",
                out.best_qfi,
                out.best_qfi / n2,
                out.greedy_qfi,
                cfg.episodes,
                out.log.wall_clock_secs
            );
        }
        Command::Rollout { common, checkpoint } => {
            let cfg = common.resolve()?;
            let ck = Checkpoint::load(&checkpoint)?;
            if ck.nets.scheme != cfg.physics.scheme {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint was trained for {}, config asks for {}",
                    ck.nets.scheme, cfg.physics.scheme
                )));
            }
            if ck.nets.actor.input_dim() != cfg.physics.obs_dim() {
                return Err(Error::InvalidConfig("checkpoint observation width does not match observe_time".into()));
            }
            let prefix = format!("rollout_{}_N{}", cfg.physics.scheme, cfg.physics.n_atoms);
            snapshot(&cfg, &prefix, json!({ "checkpoint": checkpoint }))?;
            let (seq, trace) = greedy_rollout(&ck.nets.actor, &cfg.physics)?;
            seq.save(&out_file(&cfg, &prefix, "sequence.json"))?;
            write_trace(&out_file(&cfg, &prefix, "trace.csv"), &seq)?;
            println!("greedy F_Q = {:.6}", trace.final_qfi());
        }
        Command::Oracle { common, max_sequences } => {
            let cfg = common.resolve()?;
            let p = &cfg.physics;
            let budget = max_sequences.unwrap_or_else(|| default_oracle_budget(p.scheme));
            let prefix = format!("oracle_{}_N{}_nt{}", p.scheme, p.n_atoms, p.n_intervals);
            snapshot(&cfg, &prefix, json!({ "max_sequences": budget.to_string() }))?;
            let r = brute_force_oracle(p, budget)?;
            r.best.save(&out_file(&cfg, &prefix, "sequence.json"))?;
            #[derive(Serialize)]
            struct Row {
                index: usize,
                actions: String,
                final_qfi: f64,
            }
            let rows: Vec<Row> = r
                .table
                .iter()
                .enumerate()
                .map(|(i, &q)| Row {
                    index: i,
                    actions: sequence_from_index(p.scheme, p.n_intervals, i as u64)
                        .iter()
                        .map(|a| char::from(b'0' + a.code()))
                        .collect(),
                    final_qfi: q,
                })
                .collect();
            write_csv(&out_file(&cfg, &prefix, "table.csv"), &rows)?;
            println!("{} sequences, best F_Q = {:.6}", r.table.len(), r.best_qfi);
        }
        Command::Ramsey { common, sequence, phi0, fringe_points } => {
            let seq = PulseSequence::load(&sequence)?;
            let mut common = common;
            common.scheme.get_or_insert(seq.scheme);
            common.total_time.get_or_insert(seq.total_time);
            let mut cfg = common.resolve()?;
            if common.n_atoms.is_none() && common.config.is_none() {
                cfg.physics.n_atoms = seq.n_atoms;
            }
            let n = cfg.physics.n_atoms;
            let prefix = format!("ramsey_{}_N{}", seq.scheme, n);
            snapshot(&cfg, &prefix, json!({ "sequence": sequence, "phi0": phi0 }))?;
            let ev = evaluate_sequence(&seq, n, DEFAULT_PHI0)?;
            let psi = seq.prepare(n)?;
            let r = delta_phi(&psi, Protocol::of(&seq), phi0)?;
            #[derive(Serialize)]
            struct Row {
                n_atoms: usize,
                phi: f64,
                mean_jz: f64,
                var_jz: f64,
                slope: f64,
                delta_phi: f64,
                qfi: f64,
                qfi_inv_sqrt: f64,
            }
            write_csv(
                &out_file(&cfg, &prefix, "result.csv"),
                &[Row {
                    n_atoms: n,
                    phi: r.phi,
                    mean_jz: r.mean_jz,
                    var_jz: r.var_jz,
                    slope: r.slope,
                    delta_phi: r.delta_phi,
                    qfi: ev.qfi,
                    qfi_inv_sqrt: ev.qcrb(),
                }],
            )?;
            if let Some(k) = fringe_points.filter(|&k| k >= 2) {
                #[derive(Serialize)]
                struct Fringe {
                    phi: f64,
                    mean_jz: f64,
                }
                let span = std::f64::consts::PI / n as f64;
                let rows: Vec<Fringe> = (0..k)
                    .map(|i| {
                        let phi = -span + 2.0 * span * i as f64 / (k - 1) as f64;
                        Fringe { phi, mean_jz: mean_jz(&psi, Protocol::of(&seq), phi) }
                    })
                    .collect();
                write_csv(&out_file(&cfg, &prefix, "fringe.csv"), &rows)?;
            }
            println!(
                "delta_phi = {:.6e} (N * delta_phi = {:.4}), F_Q^-1/2 = {:.6e}",
                r.delta_phi,
                r.delta_phi * n as f64,
                ev.qcrb()
            );
        }
        Command::Sweep { common, sequence, grid } => {
            let seq = PulseSequence::load(&sequence)?;
            let mut common = common;
            common.n_atoms.get_or_insert(seq.n_atoms);
            common.scheme.get_or_insert(seq.scheme);
            common.total_time.get_or_insert(seq.total_time);
            let cfg = common.resolve()?;
            let grid = grid.unwrap_or_else(default_deviation_grid);
            let prefix = format!("sweep_{}_N{}", seq.scheme, seq.n_atoms);
            snapshot(&cfg, &prefix, json!({ "sequence": sequence, "grid": grid }))?;
            let table = robustness_sweep(&seq, &grid, &sequence.display().to_string())?;
            #[derive(Serialize)]
            struct Row {
                factor: f64,
                n_actual: usize,
                qfi: f64,
                qfi_inv_sqrt: f64,
                delta_phi: f64,
                relative_degradation: f64,
            }
            let rows: Vec<Row> = table
                .rows
                .iter()
                .zip(table.relative_degradation())
                .map(|(r, d)| Row {
                    factor: r.factor,
                    n_actual: r.n_actual,
                    qfi: r.qfi,
                    qfi_inv_sqrt: r.qfi_inv_sqrt,
                    delta_phi: r.delta_phi,
                    relative_degradation: d,
                })
                .collect();
            write_csv(&out_file(&cfg, &prefix, "table.csv"), &rows)?;
            println!("{} rows written", rows.len());
        }
        Command::Scaling { common, ns, seeds } => {
            let cfg = common.resolve()?;
            let prefix = format!("scaling_{}", cfg.physics.scheme);
            snapshot(&cfg, &prefix, json!({ "ns": ns, "seeds": seeds }))?;
            let fixed_t = common.total_time;
            let study = scaling_study(&ns, &seeds, |n| {
                let mut c = cfg.clone();
                c.physics.n_atoms = n;
                c.physics.total_time = match fixed_t {
                    Some(t) => t,
                    None => optimal_squeezing_time(n, c.physics.chi, &ScanGrid::default())?,
                };
                Ok(c)
            })?;
            write_csv(&out_file(&cfg, &prefix, "table.csv"), &study.rows)?;
            for s in &study.sequences {
                s.save(&out_file(&cfg, &prefix, &format!("N{}_sequence.json", s.n_atoms)))?;
            }
            let fit = json!({ "inverse_qfi": study.inverse_qfi_fit, "delta_phi": study.delta_phi_fit });
            write_atomic(&out_file(&cfg, &prefix, "fit.json"), serde_json::to_string_pretty(&fit)?.as_bytes())?;
            println!(
                "delta_phi = {:.3} N^-{:.3};  1/F_Q = {:.3} N^-{:.3}",
                study.delta_phi_fit.prefactor,
                study.delta_phi_fit.exponent,
                study.inverse_qfi_fit.prefactor,
                study.inverse_qfi_fit.exponent
            );
        }
        Command::NtScan { common, nts, seeds } => {
            let cfg = common.resolve()?;
            let prefix = format!("ntscan_{}_N{}", cfg.physics.scheme, cfg.physics.n_atoms);
            snapshot(&cfg, &prefix, json!({ "nts": nts, "seeds": seeds }))?;
            let rows = nt_scan(&cfg, &nts, &seeds)?;
            write_csv(&out_file(&cfg, &prefix, "table.csv"), &rows)?;
            for r in &rows {
                println!("n_t = {:4}: F_Q/N^2 = {:.4}", r.n_intervals, r.qfi_over_n2);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
