//! Config-driven experiment commands writing CSV tables and JSON reports.
//!
//! Every CSV starts with a `# config_sha256=.. seed=..` line and every JSON
//! report carries the same manifest. Results depend only on the config and
//! seed, never on the number of worker threads.

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{checkpoints, config_digest, ExperimentConfig};

use crate::error::Error;
use crate::jacobian::{check_continuity, generating_battery, q_exact, q_montecarlo, CONTINUITY_GAP};
use crate::model::{validate_model, MeasureModel};
use crate::sampling::{derive_seed, sample_future, sample_past};
use crate::scenery::{evaluate_generating_set, first_level_blowups, scenery_distribution, EmpiricalDistribution, GeneratingSet};
use crate::stats::{clt_ensemble, gibbs_equivalence_audit, random_prefixes};
use crate::transport::distribution_distance;

const BATTERY_STREAM: u64 = 0xb000_0000_0000_0000;
const MONTE_CARLO_STREAM: u64 = 0xc000_0000_0000_0000;
const PREFIX_STREAM: u64 = 0xd000_0000_0000_0000;
const PAST_STREAM: u64 = 0xe000_0000_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Sample,
    VerifyUsm,
    VerifyQ,
    Clt,
    GibbsBounds,
    DemoNonergodic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Sample => "sample",
            Command::VerifyUsm => "verify-usm",
            Command::VerifyQ => "verify-q",
            Command::Clt => "clt",
            Command::GibbsBounds => "gibbs-bounds",
            Command::DemoNonergodic => "demo-nonergodic",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Unreadable or schema-invalid configuration.
    Config(String),
    /// A model invariant or an unsupported model/command combination.
    Model(Error),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Model(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "invalid config: {m}"),
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Model(e)
    }
}

fn io(e: impl fmt::Display) -> RunError {
    RunError::Io(e.to_string())
}

/// What a command produced; `passed` drives the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

pub struct Run {
    config: ExperimentConfig,
    digest: String,
    seed: u64,
    out: PathBuf,
}

fn fmt_word(e: &[u8]) -> String {
    e.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

impl Run {
    /// Parses the config text; `seed` overrides the configured seed.
    pub fn from_json(text: &str, seed: Option<u64>, out: impl Into<PathBuf>) -> Result<Run, RunError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        if config.depth == 0 {
            return Err(RunError::Config("depth must be at least 1".into()));
        }
        Ok(Run {
            seed: seed.unwrap_or(config.seed),
            digest: config_digest(text.as_bytes()),
            config,
            out: out.into(),
        })
    }

    pub fn from_file(path: &Path, seed: Option<u64>, out: impl Into<PathBuf>) -> Result<Run, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Run::from_json(&text, seed, out)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn manifest_line(&self) -> String {
        format!("# config_sha256={} seed={}", self.digest, self.seed)
    }

    pub fn execute(&self, command: Command) -> Result<Outcome, RunError> {
        fs::create_dir_all(&self.out).map_err(io)?;
        match command {
            Command::Validate => self.validate(),
            Command::Sample => self.sample(),
            Command::VerifyUsm => self.verify_usm(),
            Command::VerifyQ => self.verify_q(),
            Command::Clt => self.clt(),
            Command::GibbsBounds => self.gibbs_bounds(),
            Command::DemoNonergodic => self.demo_nonergodic(),
        }
    }

    fn model(&self) -> Result<MeasureModel, RunError> {
        Ok(self.config.model.build()?)
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, RunError> {
        let path = self.out.join(name);
        let mut buf = format!("{}\n", self.manifest_line()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(io)?;
            for r in rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        fs::write(&path, buf).map_err(io)?;
        Ok(path)
    }

    fn write_distribution(&self, name: &str, d: &EmpiricalDistribution) -> Result<PathBuf, RunError> {
        let path = self.out.join(name);
        let mut buf = format!("{}\n", self.manifest_line()).into_bytes();
        d.write_csv(&mut buf)?;
        fs::write(&path, buf).map_err(io)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, command: Command, report: &T) -> Result<PathBuf, RunError> {
        let path = self.out.join(name);
        let doc = json!({
            "manifest": {"config_sha256": self.digest, "seed": self.seed, "command": command.name()},
            "report": report,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(io)?;
        text.push('\n');
        fs::write(&path, text).map_err(io)?;
        Ok(path)
    }

    /// Ergodic pieces whose `Q` the battery is checked against.
    fn targets(model: &MeasureModel) -> Vec<&MeasureModel> {
        match model {
            MeasureModel::Mixture(m) => m.components().iter().collect(),
            other => vec![other],
        }
    }

    fn battery(&self, model: &MeasureModel) -> Result<Vec<GeneratingSet>, RunError> {
        let cfg = &self.config.battery;
        let targets = Self::targets(model);
        let depth = self.config.depth;
        if !cfg.sets.is_empty() {
            for s in &cfg.sets {
                let set = GeneratingSet::new(s.e.clone(), s.a, s.b).map_err(|e| RunError::Config(e.to_string()))?;
                model.alphabet().check(set.e.symbols()).map_err(|e| RunError::Config(e.to_string()))?;
                if set.e.len() > depth {
                    return Err(RunError::Config(format!("word {} deeper than depth {depth}", set.e)));
                }
                for t in &targets {
                    check_continuity(t, &set, CONTINUITY_GAP).map_err(|e| RunError::Config(e.to_string()))?;
                }
            }
            return Ok(cfg.sets.clone());
        }
        if cfg.max_depth > depth {
            return Err(RunError::Config(format!("battery depth {} exceeds depth {depth}", cfg.max_depth)));
        }
        let spare = if targets.len() > 1 { 10 } else { 1 };
        let candidates =
            generating_battery(targets[0], cfg.max_depth, cfg.count * spare, derive_seed(self.seed, BATTERY_STREAM))?;
        let sets: Vec<_> = candidates
            .into_iter()
            .filter(|s| targets.iter().all(|t| check_continuity(t, s, CONTINUITY_GAP).is_ok()))
            .take(cfg.count)
            .collect();
        if sets.len() < cfg.count {
            return Err(RunError::Config("could not generate a continuity-set battery for every component".into()));
        }
        Ok(sets)
    }

    fn validate(&self) -> Result<Outcome, RunError> {
        let report = validate_model(&self.config.model);
        let path = self.write_json("validation.json", Command::Validate, &report)?;
        let summary = if report.passed {
            format!("{} model valid (worst residual {:e})", report.model, report.worst_residual)
        } else {
            let failed: Vec<String> =
                report.failed().map(|c| format!("{} (residual {:e}): {}", c.name, c.residual, c.detail)).collect();
            format!("invariant failure: {}", failed.join("; "))
        };
        Ok(Outcome { passed: report.passed, summary, files: vec![path] })
    }

    fn sample(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let cfg = &self.config.sample;
        let trajectories = (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(self.seed, i);
                let mut t = sample_future(&model, cfg.length, seed)?;
                if cfg.past_length > 0 {
                    let source = match (&model, t.component) {
                        (MeasureModel::Mixture(m), Some(c)) => &m.components()[c],
                        _ => &model,
                    };
                    t.past = Some(sample_past(source, cfg.past_length, derive_seed(seed, PAST_STREAM))?);
                }
                Ok(t)
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let admissible = trajectories.iter().all(|t| t.is_admissible(&model));
        let path = self.out.join("trajectories.json");
        fs::write(&path, serde_json::to_string(&trajectories).map_err(io)? + "\n").map_err(io)?;
        let manifest = self.write_json(
            "trajectories.manifest.json",
            Command::Sample,
            &json!({
                "model_id": model.fingerprint(),
                "trajectories": cfg.trajectories,
                "length": cfg.length,
                "past_length": cfg.past_length,
                "admissible": admissible,
            }),
        )?;
        Ok(Outcome {
            passed: admissible,
            summary: format!("{} trajectories of length {}", cfg.trajectories, cfg.length),
            files: vec![path, manifest],
        })
    }

    fn verify_usm(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let cfg = &self.config.usm;
        let depth = self.config.depth;
        if cfg.trajectories == 0 || cfg.max_n == 0 {
            return Err(RunError::Config("usm needs at least one trajectory and max_n >= 1".into()));
        }
        let targets = Self::targets(&model);
        let limits = targets.iter().map(|t| first_level_blowups(t, depth)).collect::<crate::Result<Vec<_>>>()?;
        let battery = self.battery(&model)?;
        let exact: Vec<Vec<f64>> = targets
            .iter()
            .map(|t| battery.iter().map(|u| q_exact(t, u)).collect::<crate::Result<Vec<_>>>())
            .collect::<crate::Result<_>>()?;
        let marks = checkpoints(cfg.max_n);

        struct Row {
            seed: u64,
            component: usize,
            per_n: Vec<(usize, usize, f64, f64)>,
            last: EmpiricalDistribution,
        }
        let runs = (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(|i| -> crate::Result<Row> {
                let seed = derive_seed(self.seed, i);
                let t = sample_future(&model, cfg.max_n, seed)?;
                let c = t.component.unwrap_or(0);
                let mut per_n = Vec::new();
                let mut last = None;
                for &n in &marks {
                    let d = scenery_distribution(&model, t.future.symbols(), n, depth)?;
                    let dist = distribution_distance(&d, &limits[c])?;
                    let mut err = 0.0f64;
                    for (u, q) in battery.iter().zip(&exact[c]) {
                        err = err.max((evaluate_generating_set(&d, u)? - q).abs());
                    }
                    per_n.push((n, d.len(), dist, err));
                    last = Some(d);
                }
                Ok(Row { seed, component: c, per_n, last: last.expect("at least one checkpoint") })
            })
            .collect::<crate::Result<Vec<_>>>()?;

        let mut rows = Vec::new();
        for (i, r) in runs.iter().enumerate() {
            for &(n, atoms, dist, err) in &r.per_n {
                rows.push(vec![
                    i.to_string(),
                    r.seed.to_string(),
                    r.component.to_string(),
                    n.to_string(),
                    atoms.to_string(),
                    format!("{dist}"),
                    format!("{err}"),
                ]);
            }
        }
        let mut files = vec![self.write_csv(
            "usm_convergence.csv",
            &["trajectory", "seed", "component", "n", "atoms", "distance", "battery_max_error"],
            &rows,
        )?];
        files.push(self.write_distribution("scenery_distribution.csv", &runs[0].last)?);
        for (c, l) in limits.iter().enumerate() {
            let name = if limits.len() == 1 { "limit_distribution.csv".to_string() } else { format!("limit_distribution_component{c}.csv") };
            files.push(self.write_distribution(&name, l)?);
        }

        let final_err = runs.iter().map(|r| r.per_n.last().unwrap().3).fold(0.0, f64::max);
        let final_dist = runs.iter().map(|r| r.per_n.last().unwrap().2).fold(0.0, f64::max);
        let mut spread = 0.0f64;
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                spread = spread.max(distribution_distance(&runs[i].last, &runs[j].last)?);
            }
        }
        let verdict = if runs.len() < 2 {
            "single trajectory"
        } else if spread > cfg.separation {
            "not uniformly scaling"
        } else {
            "consistent with uniform scaling"
        };
        let passed = final_err < cfg.tolerance;
        files.push(self.write_json(
            "usm_report.json",
            Command::VerifyUsm,
            &json!({
                "checkpoints": marks,
                "trajectories": runs.len(),
                "battery_size": battery.len(),
                "final_max_battery_error": final_err,
                "final_max_distance": final_dist,
                "tolerance": cfg.tolerance,
                "max_pairwise_final_distance": spread,
                "verdict": verdict,
                "passed": passed,
            }),
        )?);
        Ok(Outcome {
            passed,
            summary: format!("battery error {final_err:.3e}, distance {final_dist:.3e}, {verdict}"),
            files,
        })
    }

    fn verify_q(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let cfg = &self.config.q;
        let battery = self.battery(&model)?;
        let header = ["e", "a", "b", "method", "value", "standard_error"];
        if let MeasureModel::Mixture(m) = &model {
            // No single Q exists; report each component's.
            let mut rows = Vec::new();
            for u in &battery {
                for (c, comp) in m.components().iter().enumerate() {
                    rows.push(vec![
                        fmt_word(u.e.symbols()),
                        format!("{}", u.a),
                        format!("{}", u.b),
                        format!("exact_component_{c}"),
                        format!("{}", q_exact(comp, u)?),
                        "0".into(),
                    ]);
                }
            }
            let path = self.write_csv("q_battery.csv", &header, &rows)?;
            return Ok(Outcome { passed: true, summary: "mixture: per-component Q reported".into(), files: vec![path] });
        }
        let t = sample_future(&model, cfg.scenery_n, derive_seed(self.seed, 0))?;
        let scenery = scenery_distribution(&model, t.future.symbols(), cfg.scenery_n, self.config.depth)?;
        let entries = battery
            .par_iter()
            .enumerate()
            .map(|(j, u)| -> crate::Result<_> {
                let exact = q_exact(&model, u)?;
                let mc = q_montecarlo(&model, u, cfg.samples, derive_seed(self.seed, MONTE_CARLO_STREAM + j as u64))?;
                let emp = evaluate_generating_set(&scenery, u)?;
                Ok((exact, mc, emp))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut report = Vec::new();
        let (mut mc_ok, mut emp_ok) = (0usize, 0usize);
        for (u, &(exact, mc, emp)) in battery.iter().zip(&entries) {
            let (e, a, b) = (fmt_word(u.e.symbols()), format!("{}", u.a), format!("{}", u.b));
            rows.push(vec![e.clone(), a.clone(), b.clone(), "exact".into(), format!("{exact}"), "0".into()]);
            rows.push(vec![e.clone(), a.clone(), b.clone(), "montecarlo".into(), format!("{}", mc.estimate), format!("{}", mc.standard_error)]);
            rows.push(vec![e, a, b, "scenery".into(), format!("{emp}"), "0".into()]);
            let mc_pass = (mc.estimate - exact).abs() <= cfg.se_multiple * mc.standard_error;
            let emp_pass = (emp - exact).abs() < cfg.empirical_tolerance;
            mc_ok += mc_pass as usize;
            emp_ok += emp_pass as usize;
            report.push(json!({
                "e": u.e, "a": u.a, "b": u.b,
                "exact": exact, "montecarlo": mc.estimate, "standard_error": mc.standard_error, "scenery": emp,
                "delta_scenery_exact": emp - exact,
                "delta_montecarlo_exact": mc.estimate - exact,
                "delta_scenery_montecarlo": emp - mc.estimate,
                "montecarlo_within_gate": mc_pass,
                "scenery_within_gate": emp_pass,
            }));
        }
        let n = battery.len();
        let passed = emp_ok == n && mc_ok as f64 >= cfg.min_pass_fraction * n as f64 - 1e-9;
        let files = vec![
            self.write_csv("q_battery.csv", &header, &rows)?,
            self.write_json(
                "q_report.json",
                Command::VerifyQ,
                &json!({
                    "entries": report,
                    "scenery_n": cfg.scenery_n,
                    "samples": cfg.samples,
                    "scenery_within_gate": emp_ok,
                    "montecarlo_within_gate": mc_ok,
                    "passed": passed,
                }),
            )?,
        ];
        Ok(Outcome {
            passed,
            summary: format!("{emp_ok}/{n} scenery values and {mc_ok}/{n} Monte Carlo estimates within tolerance"),
            files,
        })
    }

    fn clt(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let cfg = &self.config.clt;
        let set = cfg.set.as_ref().ok_or_else(|| RunError::Config("clt.set is required".into()))?;
        let set = GeneratingSet::new(set.e.clone(), set.a, set.b).map_err(|e| RunError::Config(e.to_string()))?;
        model.alphabet().check(set.e.symbols()).map_err(|e| RunError::Config(e.to_string()))?;
        let report = clt_ensemble(&model, &set, cfg.n, cfg.m, self.seed)?;
        let mean_ok = report.sample_mean.abs() <= cfg.mean_tolerance;
        let chain_ok = (report.sample_variance / report.sigma2_chain - 1.0).abs() <= cfg.variance_tolerance;
        let iid_ok = (report.sample_variance / report.sigma2_iid - 1.0).abs() <= cfg.variance_tolerance;
        let passed = mean_ok && chain_ok;
        let rows: Vec<Vec<String>> = report.statistics.iter().map(|s| vec![format!("{s}")]).collect();
        let files = vec![
            self.write_csv("clt_statistics.csv", &["statistic"], &rows)?,
            self.write_json(
                "clt_report.json",
                Command::Clt,
                &json!({
                    "report": report,
                    "mean_within_gate": mean_ok,
                    "variance_matches_chain": chain_ok,
                    "variance_matches_iid": iid_ok,
                    "passed": passed,
                }),
            )?,
        ];
        let flag = if report.iid_variance_mismatch {
            format!(" (chain variance differs from Q - Q^2 = {:.4} by {:+.1}%)", report.sigma2_iid, 100.0 * report.iid_deviation)
        } else {
            String::new()
        };
        Ok(Outcome {
            passed,
            summary: format!(
                "mean {:.4}, variance {:.4} vs chain {:.4}{flag}",
                report.sample_mean, report.sample_variance, report.sigma2_chain
            ),
            files,
        })
    }

    fn gibbs_bounds(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let cfg = &self.config.gibbs;
        if cfg.min_length > cfg.max_length {
            return Err(RunError::Config("gibbs.min_length exceeds gibbs.max_length".into()));
        }
        let prefixes =
            random_prefixes(&model, cfg.prefixes, cfg.min_length, cfg.max_length, derive_seed(self.seed, PREFIX_STREAM));
        let report = gibbs_equivalence_audit(&model, &prefixes, cfg.depth)?;
        let path = self.write_json("gibbs_report.json", Command::GibbsBounds, &report)?;
        Ok(Outcome {
            passed: report.passed,
            summary: format!("ratios in [{:.6}, {:.6}], C = {:.6}", report.min_ratio, report.max_ratio, report.bound),
            files: vec![path],
        })
    }

    fn demo_nonergodic(&self) -> Result<Outcome, RunError> {
        let model = self.model()?;
        let MeasureModel::Mixture(mix) = &model else {
            return Err(RunError::Model(Error::InvalidArgument("demo-nonergodic needs a mixture model".into())));
        };
        let cfg = &self.config.nonergodic;
        let depth = self.config.depth;
        let limits = mix
            .components()
            .iter()
            .map(|c| first_level_blowups(c, depth))
            .collect::<crate::Result<Vec<_>>>()?;
        let runs = (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(|i| -> crate::Result<_> {
                let seed = derive_seed(self.seed, i);
                let t = sample_future(&model, cfg.n, seed)?;
                let c = t.component.expect("mixture trajectory");
                let d = scenery_distribution(&model, t.future.symbols(), cfg.n, depth)?;
                let dists = limits.iter().map(|l| distribution_distance(&d, l)).collect::<crate::Result<Vec<_>>>()?;
                Ok((seed, c, dists))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut worst_own = 0.0f64;
        let mut seen = vec![false; limits.len()];
        for (i, (seed, c, dists)) in runs.iter().enumerate() {
            let other = dists.iter().enumerate().filter(|(j, _)| j != c).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
            worst_own = worst_own.max(dists[*c]);
            seen[*c] = true;
            rows.push(vec![i.to_string(), seed.to_string(), c.to_string(), format!("{}", dists[*c]), format!("{other}")]);
        }
        let mut centers = f64::INFINITY;
        for i in 0..limits.len() {
            for j in i + 1..limits.len() {
                centers = centers.min(distribution_distance(&limits[i], &limits[j])?);
            }
        }
        let all_seen = seen.iter().all(|&s| s);
        let passed = worst_own <= cfg.component_tolerance && centers > cfg.separation && all_seen;
        let verdict = if passed { "not uniformly scaling" } else { "inconclusive" };
        let files = vec![
            self.write_csv(
                "nonergodic.csv",
                &["trajectory", "seed", "component", "distance_own_q", "distance_nearest_other_q"],
                &rows,
            )?,
            self.write_json(
                "nonergodic_report.json",
                Command::DemoNonergodic,
                &json!({
                    "trajectories": runs.len(),
                    "n": cfg.n,
                    "max_distance_to_own_component": worst_own,
                    "min_center_distance": centers,
                    "all_components_observed": all_seen,
                    "verdict": verdict,
                    "passed": passed,
                }),
            )?,
        ];
        Ok(Outcome {
            passed,
            summary: format!("max distance to own Q {worst_own:.4}, center separation {centers:.4}: {verdict}"),
            files,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (tempfile::TempDir, Run) {
        let dir = tempfile::tempdir().unwrap();
        let r = Run::from_json(text, None, dir.path()).unwrap();
        (dir, r)
    }

    const M_STAR: &str = r#"{"model": {"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]}, "seed": 42,
        "q": {"samples": 2000, "scenery_n": 2000, "empirical_tolerance": 0.1},
        "usm": {"max_n": 1000, "tolerance": 0.1},
        "clt": {"n": 200, "m": 100, "set": {"e": [0], "a": 0.5, "b": 0.95}, "mean_tolerance": 1.0, "variance_tolerance": 1.0},
        "gibbs": {"prefixes": 20, "depth": 3}}"#;

    #[test]
    fn every_command_writes_manifested_output() {
        let (_d, r) = run(M_STAR);
        for cmd in [Command::Validate, Command::Sample, Command::VerifyUsm, Command::VerifyQ, Command::Clt, Command::GibbsBounds] {
            let out = r.execute(cmd).unwrap();
            assert!(out.passed, "{}: {}", cmd.name(), out.summary);
            for f in &out.files {
                let text = fs::read_to_string(f).unwrap();
                if f.extension().unwrap() == "csv" {
                    assert!(text.starts_with("# config_sha256="));
                } else if !f.ends_with("trajectories.json") {
                    assert!(text.contains("config_sha256"));
                }
            }
        }
        assert!(matches!(r.execute(Command::DemoNonergodic), Err(RunError::Model(_))));
    }

    #[test]
    fn outputs_do_not_depend_on_threads() {
        let mut outputs = Vec::new();
        for threads in [1, 4] {
            let (d, r) = run(M_STAR);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| r.execute(Command::VerifyQ).unwrap());
            outputs.push((fs::read(d.path().join("q_battery.csv")).unwrap(), d));
        }
        assert_eq!(outputs[0].0, outputs[1].0);
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let e = Run::from_json(r#"{"model": {"type": "markov"}, "seed": 1}"#, None, dir.path()).err().unwrap();
        assert_eq!(e.exit_code(), 3);
        let touching = r#"{"model": {"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]}, "seed": 1,
            "battery": {"sets": [{"e": [0], "a": 0.5, "b": 0.9}]}}"#;
        let (_d, r) = run(touching);
        assert_eq!(r.execute(Command::VerifyQ).err().unwrap().exit_code(), 3);
        let (_d, r) = run(r#"{"model": {"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]}, "seed": 1}"#);
        assert_eq!(r.execute(Command::Clt).err().unwrap().exit_code(), 3);
    }

    #[test]
    fn invalid_model_fails_validation() {
        let (_d, r) = run(r#"{"model": {"type": "markov", "P": [[0.89, 0.1], [0.2, 0.8]]}, "seed": 1}"#);
        let out = r.execute(Command::Validate).unwrap();
        assert!(!out.passed && out.summary.contains("row_sums"));
        assert_eq!(r.execute(Command::VerifyQ).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn seed_override_changes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let r = Run::from_json(M_STAR, Some(7), dir.path()).unwrap();
        assert!(r.manifest_line().ends_with("seed=7"));
    }
}
