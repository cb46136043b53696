//! Command-line front end of the `cvsat` binary.
//!
//! The resolved configuration is the config file (or built-in defaults),
//! then the `--paper-defaults` preset, then command-line overrides. It is
//! validated in full before anything is computed or written.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attack::Strategy;
use crate::config::{sweep_distances, validate_sweep, ExperimentConfig, OutputFormat, StrategyKind};
use crate::error::{Error, Result};
use crate::estimation::block_estimates;
use crate::optimizer::{
    calibrate_lin_coeff, calibrate_quad_coeff, distance_sweep, feasibility_boundary, link_budget, optimize_attack,
    success_check_estimate, OptimizerConfig,
};
use crate::protocol::ProtocolParams;
use crate::rating::{rate_catalog, Catalog, CatalogEntry, Equipment, Expertise, Knowledge, Window};
use crate::report::{finite, write_report, Meta, RatingRecord, ResultRecord, ThresholdRecord};
use crate::rng::SimRng;
use crate::security::{key_rate, null_key_threshold, SecurityParams};

/// Offset around the null-key threshold at which the key rate is reported.
pub const THRESHOLD_BRACKET: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "cvsat", version, about = "Saturation attacks on CV-QKD homodyne detection")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Pin detector, protocol and noise-model constants to the built-in calibration.
    #[arg(long = "paper-defaults", global = true)]
    pub calibrated: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Coherent,
    Incoherent,
}

#[derive(Debug, Args, Default)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Zero the residual phase-noise term of the coherent strategy.
    #[arg(long)]
    pub no_phase_noise: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimates at fixed or optimized attack points.
    Simulate {
        /// Fiber length; repeat for several (defaults to `run.distances_km`).
        #[arg(long = "distance-km")]
        distances: Vec<f64>,
        /// Fixed displacement in √N0; skips the optimizer.
        #[arg(long, requires = "gain")]
        delta: Option<f64>,
        /// Fixed gain of Eve's resend.
        #[arg(long, requires = "delta")]
        gain: Option<f64>,
        /// Number of estimation blocks (at least 2).
        #[arg(long)]
        blocks: Option<usize>,
        /// Pulses per block.
        #[arg(long)]
        block_size: Option<usize>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Best attack per distance from the large-sample estimator limit.
    Optimize {
        /// Fiber length; repeat for several (defaults to `run.distances_km`).
        #[arg(long = "distance-km")]
        distances: Vec<f64>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Optimized attack over an evenly spaced distance grid.
    Sweep {
        #[arg(long)]
        from_km: Option<f64>,
        #[arg(long)]
        to_km: Option<f64>,
        #[arg(long)]
        step_km: Option<f64>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Excess-noise level at which the key rate vanishes.
    Threshold {
        /// Fiber length; repeat for several (defaults to `run.distances_km`).
        #[arg(long = "distance-km")]
        distances: Vec<f64>,
    },
    /// Shortest distance at which the attack succeeds.
    Boundary {
        #[arg(long, default_value_t = 0.0)]
        from_km: f64,
        #[arg(long, default_value_t = 100.0)]
        to_km: f64,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Attack potential and severity of attack paths.
    Rate {
        /// Label printed with the rating.
        #[arg(long, default_value = "attack")]
        name: String,
        #[arg(long, value_parser = level::<Expertise>, requires_all = ["knowledge", "window", "equipment"])]
        expertise: Option<Expertise>,
        #[arg(long, value_parser = level::<Knowledge>, requires = "expertise")]
        knowledge: Option<Knowledge>,
        #[arg(long, value_parser = level::<Window>, requires = "expertise")]
        window: Option<Window>,
        #[arg(long, value_parser = level::<Equipment>, requires = "expertise")]
        equipment: Option<Equipment>,
        /// TOML catalog with `[[attack]]` entries; the built-in catalog when absent.
        #[arg(long, conflicts_with = "expertise")]
        catalog: Option<PathBuf>,
    },
    /// Fits the noise coefficients to target feasibility boundaries.
    Calibrate {
        /// Target boundary of the incoherent strategy.
        #[arg(long, default_value_t = 35.0)]
        incoherent_km: f64,
        /// Target boundary of the coherent strategy without phase noise.
        #[arg(long, default_value_t = 50.0)]
        coherent_km: f64,
    },
}

fn level<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidParameter { .. } | Error::Rating(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be positive"));
        }
        // A pool installed earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(&cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let ctx = Context { cfg, out };
    match &cli.command {
        Command::Simulate { .. } => ctx.simulate(),
        Command::Optimize { .. } => ctx.solutions("optimize", &ctx.cfg.run.distances_km),
        Command::Sweep { .. } => ctx.sweep(),
        Command::Threshold { .. } => ctx.threshold(),
        Command::Boundary { from_km, to_km, .. } => ctx.boundary(*from_km, *to_km),
        Command::Rate {
            name,
            expertise,
            knowledge,
            window,
            equipment,
            catalog,
        } => {
            let entries = match (expertise, knowledge, window, equipment) {
                (Some(e), Some(k), Some(w), Some(q)) => vec![CatalogEntry {
                    name: name.clone(),
                    expertise: *e,
                    knowledge: *k,
                    window: *w,
                    equipment: *q,
                    notes: String::new(),
                    elapsed_time: None,
                }],
                _ => match catalog {
                    Some(path) => Catalog::from_toml(&std::fs::read_to_string(path)?)?.attacks,
                    None => Catalog::saturation_attacks().attacks,
                },
            };
            ctx.rate(&entries)
        }
        Command::Calibrate {
            incoherent_km,
            coherent_km,
        } => ctx.calibrate(*incoherent_km, *coherent_km),
    }
}

/// Applies the preset and command-line overrides on top of the file.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.calibrated {
        cfg.apply_calibrated_preset();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f.into();
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    let attack = match &cli.command {
        Command::Simulate {
            distances,
            delta,
            gain,
            blocks,
            block_size,
            attack,
        } => {
            if !distances.is_empty() {
                cfg.run.distances_km = distances.clone();
            }
            if delta.is_some() {
                cfg.run.delta = *delta;
                cfg.run.gain = *gain;
            }
            if let Some(b) = blocks {
                cfg.monte_carlo.blocks = *b;
            }
            if let Some(n) = block_size {
                cfg.monte_carlo.block_size = *n;
            }
            Some(attack)
        }
        Command::Optimize { distances, attack } => {
            if !distances.is_empty() {
                cfg.run.distances_km = distances.clone();
            }
            Some(attack)
        }
        Command::Sweep {
            from_km,
            to_km,
            step_km,
            attack,
        } => {
            cfg.run.sweep_from_km = from_km.unwrap_or(cfg.run.sweep_from_km);
            cfg.run.sweep_to_km = to_km.unwrap_or(cfg.run.sweep_to_km);
            cfg.run.sweep_step_km = step_km.unwrap_or(cfg.run.sweep_step_km);
            Some(attack)
        }
        Command::Threshold { distances } => {
            if !distances.is_empty() {
                cfg.run.distances_km = distances.clone();
            }
            None
        }
        Command::Boundary { attack, .. } => Some(attack),
        Command::Rate { .. } | Command::Calibrate { .. } => None,
    };
    if let Some(a) = attack {
        match a.strategy {
            Some(StrategyArg::Coherent) => cfg.attack.strategy = StrategyKind::Coherent,
            Some(StrategyArg::Incoherent) => cfg.attack.strategy = StrategyKind::Incoherent,
            None => {}
        }
        if a.no_phase_noise {
            cfg.attack.coherent = cfg.attack.coherent.without_phase_noise();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn meta(&self, subcommand: &str) -> Meta {
        Meta::new(subcommand, self.cfg.seed, self.cfg.sha256())
    }

    fn emit<R: serde::Serialize>(&self, subcommand: &str, rows: &[R]) -> Result<()> {
        let paths = write_report(
            &self.out,
            subcommand,
            &self.meta(subcommand),
            rows,
            self.cfg.output.format,
        )?;
        for p in paths {
            println!("wrote {}", p.display());
        }
        Ok(())
    }

    fn optimizer(&self) -> Result<OptimizerConfig> {
        self.cfg.optimizer_config()
    }

    fn strategy(&self) -> Strategy {
        self.cfg.attack.strategy()
    }

    fn simulate(&self) -> Result<()> {
        let opt = self.optimizer()?;
        let cond = self.cfg.optimizer.success;
        let mc = &self.cfg.monte_carlo;
        let distances = &self.cfg.run.distances_km;
        let mut rows = Vec::with_capacity(distances.len());
        for (i, &d) in distances.iter().enumerate() {
            let link = link_budget(d, &opt)?;
            let (delta, gain) = match (self.cfg.run.delta, self.cfg.run.gain) {
                (Some(delta), Some(gain)) => (delta, gain),
                _ => {
                    let s = optimize_attack(d, self.strategy(), &cond, &opt)?;
                    (s.delta, s.gain)
                }
            };
            let p = ProtocolParams {
                v_a: link.v_a,
                t: link.t,
                ..opt.protocol
            };
            let a = self.cfg.attack_at(delta, gain);
            let seed = SimRng::new(self.cfg.seed, i as u64).next_u64();
            let est = block_estimates(&p, &a, mc.blocks, mc.block_size, seed)?;
            let k = attack_key_rate(&p, opt.beta, est.t_sat, est.xi_sat);
            let report = success_check_estimate(&est, link.t, link.xi_null, k.unwrap_or(f64::NEG_INFINITY), &cond);
            rows.push(ResultRecord {
                d_km: d,
                t: link.t,
                v_a: link.v_a,
                delta,
                gain,
                t_sat: finite(est.t_sat),
                t_sat_std: finite(est.std_t),
                xi_sat: finite(est.xi_sat),
                xi_sat_std: finite(est.std_xi),
                xi_null: link.xi_null,
                k_attack: k,
                k_honest: link.k_honest,
                feasible: report.feasible,
            });
            print_result(rows.last().unwrap(), &report.reasons);
        }
        self.emit("simulate", &rows)
    }

    fn sweep(&self) -> Result<()> {
        let r = &self.cfg.run;
        validate_sweep(r.sweep_from_km, r.sweep_to_km, r.sweep_step_km)?;
        self.solutions(
            "sweep",
            &sweep_distances(r.sweep_from_km, r.sweep_to_km, r.sweep_step_km),
        )
    }

    fn solutions(&self, subcommand: &str, distances: &[f64]) -> Result<()> {
        let sols = distance_sweep(
            self.strategy(),
            distances,
            &self.cfg.optimizer.success,
            &self.optimizer()?,
        )?;
        let rows: Vec<ResultRecord> = sols.iter().map(ResultRecord::from).collect();
        for (row, s) in rows.iter().zip(&sols) {
            print_result(row, &s.report.reasons);
        }
        self.emit(subcommand, &rows)
    }

    fn threshold(&self) -> Result<()> {
        let opt = self.optimizer()?;
        let p = &opt.protocol;
        let mut rows = Vec::new();
        for &d in &self.cfg.run.distances_km {
            let link = link_budget(d, &opt)?;
            let xi_null = null_key_threshold(link.t, link.v_a, p.eta_b, p.v_ele, opt.beta)?;
            let k_at = |xi: f64| {
                key_rate(&SecurityParams {
                    v_a: link.v_a,
                    t: link.t,
                    xi: xi.max(0.0),
                    eta: p.eta_b,
                    v_ele: p.v_ele,
                    beta: opt.beta,
                })
            };
            let row = ThresholdRecord {
                d_km: d,
                t: link.t,
                v_a: link.v_a,
                xi_null,
                bracket: THRESHOLD_BRACKET,
                k_below: k_at(xi_null - THRESHOLD_BRACKET)?,
                k_above: k_at(xi_null + THRESHOLD_BRACKET)?,
            };
            println!(
                "d = {:6.2} km  T = {:.6}  V_A = {:.3}  xi_null = {:.6}  K(-{b:e}) = {:+.3e}  K(+{b:e}) = {:+.3e}",
                row.d_km,
                row.t,
                row.v_a,
                row.xi_null,
                row.k_below,
                row.k_above,
                b = THRESHOLD_BRACKET
            );
            rows.push(row);
        }
        self.emit("threshold", &rows)
    }

    fn boundary(&self, from_km: f64, to_km: f64) -> Result<()> {
        validate_sweep(from_km, to_km, 1.0)?;
        let opt = self.optimizer()?;
        let d = feasibility_boundary(self.strategy(), &self.cfg.optimizer.success, &opt, from_km, to_km)?;
        let sol = optimize_attack(d, self.strategy(), &self.cfg.optimizer.success, &opt)?;
        println!("shortest feasible distance: {d:.2} km");
        let row = ResultRecord::from(&sol);
        print_result(&row, &sol.report.reasons);
        self.emit("boundary", &[row])
    }

    fn rate(&self, entries: &[CatalogEntry]) -> Result<()> {
        let sheets = rate_catalog(entries)?;
        for s in &sheets {
            println!(
                "{}: AP {}{}, {}",
                s.attack_name,
                s.attack_potential,
                if s.unbounded { " (unbounded)" } else { "" },
                s.severity
            );
        }
        let rows: Vec<RatingRecord> = sheets.iter().map(RatingRecord::from).collect();
        self.emit("rate", &rows)
    }

    fn calibrate(&self, incoherent_km: f64, coherent_km: f64) -> Result<()> {
        #[derive(serde::Serialize)]
        struct Row {
            parameter: &'static str,
            target_km: f64,
            value: f64,
        }
        let opt = self.optimizer()?;
        let lin = calibrate_lin_coeff(self.cfg.attack.incoherent, &opt, incoherent_km)?;
        println!("attack.incoherent.lin_coeff = {lin}");
        let quad = calibrate_quad_coeff(self.cfg.attack.coherent, &opt, coherent_km)?;
        println!("attack.coherent.quad_coeff = {quad}");
        let rows = [
            Row {
                parameter: "attack.incoherent.lin_coeff",
                target_km: incoherent_km,
                value: lin,
            },
            Row {
                parameter: "attack.coherent.quad_coeff",
                target_km: coherent_km,
                value: quad,
            },
        ];
        self.emit("calibrate", &rows)
    }
}

/// Key rate the honest parties would compute from their estimates.
fn attack_key_rate(p: &ProtocolParams, beta: f64, t_sat: f64, xi_sat: f64) -> Option<f64> {
    if !(t_sat > 0.0 && t_sat <= 1.0 && xi_sat.is_finite()) {
        return None;
    }
    let s = SecurityParams::from_estimate(p.v_a, t_sat, xi_sat, p.eta_b, p.v_ele, beta);
    key_rate(&s).ok().and_then(finite)
}

fn print_result(r: &ResultRecord, reasons: &[String]) {
    let opt = |x: Option<f64>, prec: usize| x.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"));
    println!(
        "d = {:6.2} km  delta = {:8.3}  G = {:6.4}  T_sat = {} (T = {:.6})  xi_sat = {} (xi_null = {:.6})  K = {}  {}",
        r.d_km,
        r.delta,
        r.gain,
        opt(r.t_sat, 6),
        r.t,
        opt(r.xi_sat, 6),
        r.xi_null,
        r.k_attack.map_or_else(|| "-".to_string(), |k| format!("{k:.3e}")),
        if r.feasible {
            "feasible".to_string()
        } else {
            format!("infeasible: {}", reasons.join("; "))
        }
    );
}
