//! End-to-end runs: analyze, synthesize, simulate, full.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::certificate::{find_stable_combinations, search_certificate, SearchOutcome};
use crate::error::{Error, Result};
use crate::io::problem::{to_instance, ProblemFile};
use crate::io::{csv, report};
use crate::signal::{check_admissible, synthesize, SwitchingSignal};
use crate::verify::{
    prefix_norms, random_initial_states, simulate, verify_ges, DecayEstimate, PrefixNorms,
    Trajectory, VerifyOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Synthesize,
    Simulate,
    Full,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::Synthesize => "synthesize",
            Self::Simulate => "simulate",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    InputError,
    NoCertificate,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::InputError => 1,
            Self::NoCertificate => 2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::InputError => "input_error",
            Self::NoCertificate => "no_certificate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub prefix: PrefixNorms,
    pub trajectories: Vec<Trajectory>,
    /// Decay check at the given rate, when one is known.
    pub decay: Option<(f64, DecayEstimate)>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Value,
    pub status: Status,
    pub outcome: Option<SearchOutcome>,
    pub signal: Option<SwitchingSignal>,
    pub simulation: Option<Simulation>,
}

/// Runs `command` on `problem`. `signal` is required by, and only accepted
/// for, [`Command::Simulate`].
pub fn run_pipeline(
    problem: &ProblemFile,
    command: Command,
    signal: Option<SwitchingSignal>,
) -> Result<PipelineOutput> {
    match (command, &signal) {
        (Command::Simulate, None) => {
            return Err(Error::InvalidInput("simulate requires a signal".into()))
        }
        (Command::Simulate, Some(_)) | (_, None) => {}
        (_, Some(_)) => {
            return Err(Error::InvalidInput(format!(
                "{} does not take a signal",
                command.as_str()
            )))
        }
    }
    let instance = to_instance(problem)?;
    let opts = &problem.options;
    let names: Vec<String> = problem.matrices.iter().map(|m| m.name.clone()).collect();

    let mut rep = Map::new();
    rep.insert("command".into(), command.as_str().into());
    rep.insert(
        "instance".into(),
        report::instance_summary(&instance, &names),
    );

    let mut out = PipelineOutput {
        report: Value::Null,
        status: Status::Ok,
        outcome: None,
        signal: None,
        simulation: None,
    };

    if command == Command::Simulate {
        let signal = signal.expect("checked above");
        let violations = check_admissible(&signal, &instance.graph, &instance.bounds);
        rep.insert("signal".into(), report::signal(&signal, &violations));
        let sim = run_simulation(
            &instance.family,
            &signal,
            opts.lambda,
            opts.trials,
            opts.seed,
        )?;
        rep.insert(
            "simulation".into(),
            simulation_report(&sim, opts.trials, opts.seed),
        );
        out.signal = Some(signal);
        out.simulation = Some(sim);
    } else {
        let search = opts.search();
        let scan = find_stable_combinations(&instance.family, &instance.bounds, &search)?;
        rep.insert("combinations".into(), report::scan(&scan));
        let outcome = search_certificate(&instance, &search)?;
        match &outcome {
            SearchOutcome::Found(cert) => {
                rep.insert("certificate".into(), report::certificate(cert));
                if command != Command::Analyze {
                    let signal = synthesize(cert, instance.bounds.delta, opts.horizon)?;
                    let violations = check_admissible(&signal, &instance.graph, &instance.bounds);
                    rep.insert("signal".into(), report::signal(&signal, &violations));
                    if command == Command::Full {
                        let sim = run_simulation(
                            &instance.family,
                            &signal,
                            Some(cert.lambda),
                            opts.trials,
                            opts.seed,
                        )?;
                        rep.insert(
                            "simulation".into(),
                            simulation_report(&sim, opts.trials, opts.seed),
                        );
                        out.simulation = Some(sim);
                    }
                    out.signal = Some(signal);
                }
            }
            SearchOutcome::NotFound(failure) => {
                rep.insert("failure".into(), report::failure(failure));
                out.status = Status::NoCertificate;
            }
        }
        out.outcome = Some(outcome);
    }
    rep.insert("status".into(), out.status.as_str().into());
    out.report = Value::Object(rep);
    Ok(out)
}

fn run_simulation(
    family: &crate::system::SubsystemFamily,
    signal: &SwitchingSignal,
    lambda: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<Simulation> {
    match lambda {
        Some(lambda) => {
            let v = verify_ges(
                family,
                signal,
                &VerifyOptions {
                    lambda,
                    trials,
                    seed,
                },
            )?;
            Ok(Simulation {
                prefix: v.prefix,
                trajectories: v.trajectories,
                decay: Some((lambda, v.estimate)),
            })
        }
        None => Ok(Simulation {
            prefix: prefix_norms(family, signal)?,
            trajectories: random_initial_states(family.dimension(), trials, seed)
                .iter()
                .map(|x0| simulate(family, signal, x0))
                .collect::<Result<_>>()?,
            decay: None,
        }),
    }
}

fn simulation_report(sim: &Simulation, trials: usize, seed: u64) -> Value {
    report::simulation(
        &sim.prefix,
        trials,
        seed,
        sim.decay.as_ref().map(|(l, e)| (*l, e)),
    )
}

/// Pretty JSON with a trailing newline.
pub fn render_report(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `signal.csv`, `blocks.csv`, `prefix_norms.csv` and
/// `trajectory_<k>.csv` (k from 1) for whatever stages ran.
pub fn write_artifacts(dir: &Path, output: &PipelineOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: String| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        let f = File::create(&path)?;
        written.push(path);
        Ok(BufWriter::new(f))
    };
    if let Some(signal) = &output.signal {
        csv::write_signal(create("signal.csv".into())?, signal)?;
        csv::write_blocks(create("blocks.csv".into())?, signal.blocks())?;
    }
    if let Some(sim) = &output.simulation {
        csv::write_norms(create("prefix_norms.csv".into())?, sim.prefix.iter())?;
        for (k, tr) in sim.trajectories.iter().enumerate() {
            let rows = tr.norms.iter().enumerate().map(|(t, &n)| (t as u64, n));
            csv::write_norms(create(format!("trajectory_{}.csv", k + 1))?, rows)?;
        }
    }
    Ok(written)
}
