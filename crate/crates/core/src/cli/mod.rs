//! Batch front end: configuration, the triggering comparison and its files.

pub mod config;
pub mod csvio;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::etm::Strategy;
use crate::linalg::spectral_abscissa;
use crate::model::{build_plant, reconstruct_trajectory, ModelError, PlantMatrices, LATERAL};
use crate::sim::{run, SimError, SimLog};
use crate::synthesis::{synthesize, to_dynamic, EtmDesign, SynthesisError, SynthesisResult};

pub use config::{load_config, parse_config, ConfigError, Scenario};
pub use csvio::SummaryRow;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("synthesis failed: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("{strategy}: {source}")]
    Simulation {
        strategy: &'static str,
        #[source]
        source: SimError,
    },
    #[error("writing {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 parse, 3 validation, 4 divergence, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. } | ConfigError::Parse(_)) => 2,
            CliError::Config(ConfigError::Invalid { .. })
            | CliError::Model(_)
            | CliError::Synthesis(_) => 3,
            CliError::Simulation {
                source: SimError::Diverged { .. },
                ..
            } => 4,
            CliError::Simulation { .. } => 3,
            CliError::Output { .. } => 1,
        }
    }
}

/// The three strategies of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    TimeTriggered,
    EtmOriginal,
    EtmImproved,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::TimeTriggered,
        StrategyKind::EtmOriginal,
        StrategyKind::EtmImproved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::TimeTriggered => "time",
            StrategyKind::EtmOriginal => "etm-original",
            StrategyKind::EtmImproved => "etm-improved",
        }
    }

    pub fn strategy(self, scenario: &Scenario) -> Strategy {
        let d = scenario.design;
        match self {
            StrategyKind::TimeTriggered => Strategy::TimeTriggered {
                period: scenario.period,
            },
            StrategyKind::EtmOriginal => Strategy::Event(EtmDesign::original(d.z_bar, d.epsilon)),
            StrategyKind::EtmImproved => Strategy::Event(d),
        }
    }
}

/// What to run and where its files go.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub output_directory: PathBuf,
    pub strategies: Vec<StrategyKind>,
}

impl RunManifest {
    pub fn log_file(&self, kind: StrategyKind) -> PathBuf {
        self.output_directory
            .join(format!("log_{}.csv", kind.name()))
    }

    pub fn trajectory_file(&self, kind: StrategyKind) -> PathBuf {
        self.output_directory
            .join(format!("trajectory_{}.csv", kind.name()))
    }

    pub fn summary_file(&self) -> PathBuf {
        self.output_directory.join("summary.csv")
    }

    pub fn certificate_file(&self) -> PathBuf {
        self.output_directory.join("certificate.txt")
    }
}

/// Plant with the configured `G`, and the gain/certificate for the configured design.
pub fn prepare(scenario: &Scenario) -> Result<(PlantMatrices, SynthesisResult), CliError> {
    let plant = build_plant(&scenario.vehicle)?.with_disturbance_matrix(scenario.g);
    let syn = synthesize(&plant, &scenario.weights, &scenario.n, scenario.design)?;
    Ok((plant, syn))
}

/// Outcome of one strategy in a comparison.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub kind: StrategyKind,
    pub log: SimLog,
    pub tau: f64,
}

/// Runs the requested strategies concurrently on one disturbance realization.
pub fn simulate_all(
    scenario: &Scenario,
    plant: &PlantMatrices,
    syn: &SynthesisResult,
    kinds: &[StrategyKind],
) -> Result<Vec<StrategyRun>, CliError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                scope.spawn(move || {
                    let strategy = kind.strategy(scenario);
                    let (tau, syn_for_run) = match strategy {
                        Strategy::TimeTriggered { period } => (period, syn.clone()),
                        Strategy::Event(d) => {
                            let s = syn.with_design(d);
                            (s.tau, s)
                        }
                    };
                    run(&scenario.sim_config(strategy), plant, &syn_for_run)
                        .map(|log| StrategyRun { kind, log, tau })
                        .map_err(|source| CliError::Simulation {
                            strategy: kind.name(),
                            source,
                        })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Number of periodic updates over the horizon, the savings baseline.
pub fn periodic_update_count(scenario: &Scenario) -> usize {
    (scenario.t_end / scenario.period * (1.0 + 1e-12)).floor() as usize
}

pub fn summarize(scenario: &Scenario, runs: &[StrategyRun]) -> Vec<SummaryRow> {
    let baseline = periodic_update_count(scenario) as f64;
    runs.iter()
        .map(|r| SummaryRow {
            strategy: r.kind.name().to_string(),
            triggers: r.log.trigger_count(),
            min_iet: r.log.min_inter_event_time(),
            mean_iet: r.log.mean_inter_event_time(),
            tau: r.tau,
            savings_pct: 100.0 * (1.0 - r.log.trigger_count() as f64 / baseline),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })
}

fn csv_failure(path: &Path, err: csv::Error) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        source: err.into(),
    }
}

/// Runs the comparison and writes per-strategy logs, trajectories, the
/// certificate and the summary (last).
pub fn run_comparison(
    scenario: &Scenario,
    manifest: &RunManifest,
) -> Result<Vec<SummaryRow>, CliError> {
    let (plant, syn) = prepare(scenario)?;
    let runs = simulate_all(scenario, &plant, &syn, &manifest.strategies)?;

    std::fs::create_dir_all(&manifest.output_directory).map_err(|source| CliError::Output {
        path: manifest.output_directory.display().to_string(),
        source,
    })?;
    for r in &runs {
        let path = manifest.log_file(r.kind);
        csvio::write_log(create(&path)?, &r.log).map_err(|e| csv_failure(&path, e))?;

        let lateral: Vec<f64> = r.log.states.iter().map(|x| x[LATERAL]).collect();
        let points =
            reconstruct_trajectory(&r.log.times, &lateral, &scenario.vehicle, &scenario.start);
        let path = manifest.trajectory_file(r.kind);
        csvio::write_trajectory(create(&path)?, &points).map_err(|e| csv_failure(&path, e))?;
    }

    let cert_path = manifest.certificate_file();
    std::fs::write(&cert_path, emit_certificate(&plant, &syn)).map_err(|source| {
        CliError::Output {
            path: cert_path.display().to_string(),
            source,
        }
    })?;

    let rows = summarize(scenario, &runs);
    let path = manifest.summary_file();
    csvio::write_summary(create(&path)?, &rows).map_err(|e| csv_failure(&path, e))?;
    Ok(rows)
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:.6e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Text report of the gain, its certificates and the inter-event bound,
/// for the configured design and for `θl = θr = 1`.
pub fn emit_certificate(plant: &PlantMatrices, syn: &SynthesisResult) -> String {
    let acl = to_dynamic(&syn.closed_loop(plant));
    let mut eig: Vec<_> = acl.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let eig_text = eig
        .iter()
        .map(|z| format!("{:.6e}{:+.6e}i", z.re, z.im))
        .collect::<Vec<_>>()
        .join(", ");

    let mut out = String::new();
    let _ = writeln!(
        out,
        "K                  = [{}]",
        fmt_row(syn.k.iter().copied())
    );
    let _ = writeln!(out, "eig(A - BK)        = [{eig_text}]");
    let _ = writeln!(out, "spectral abscissa  = {:.6e}", spectral_abscissa(&acl));
    let _ = writeln!(out, "CARE residual      = {:.6e}", syn.care_residual);
    let _ = writeln!(out, "Lyapunov residual  = {:.6e}", syn.lyapunov_residual);
    let _ = writeln!(out, "lambda_min(M)      = {:.16e}", syn.lambda_min_m);
    let _ = writeln!(out, "lambda_min(N)      = {:.16e}", syn.lambda_min_n);
    let _ = writeln!(out, "|MBK|              = {:.16e}", syn.mbk_norm);
    let original = syn.with_design(EtmDesign::original(syn.design.z_bar, syn.design.epsilon));
    for (label, s) in [("configured", syn), ("theta_l = theta_r = 1", &original)] {
        let d = s.design;
        let _ = writeln!(
            out,
            "[{label}] z_bar = {}, epsilon = {}, theta_l = {}, theta_r = {}",
            d.z_bar, d.epsilon, d.theta_l, d.theta_r
        );
        let _ = writeln!(out, "  sigma            = {:.16e}", s.sigma);
        let _ = writeln!(out, "  tau              = {:.16e} s", s.tau);
    }
    out
}

/// Human-readable rendering of the summary rows.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<14} {:>9} {:>12} {:>12} {:>12} {:>9}\n",
        "strategy", "triggers", "min IET [s]", "mean IET [s]", "tau [s]", "savings"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>12} {:>12} {:>12.4e} {:>8.1}%",
            r.strategy,
            r.triggers,
            opt(r.min_iet),
            opt(r.mean_iet),
            r.tau,
            r.savings_pct
        );
    }
    out
}
