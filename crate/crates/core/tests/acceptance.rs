//! Acceptance criteria, one PASS/FAIL line each.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use scenery::experiment::{Command, Run};
use scenery::jacobian::PastContext;
use scenery::model::validate_measure;
use scenery::sampling::{rng_from_seed, sample_future};
use scenery::scenery::{first_level_blowups, measure_vector, minimeasure, scenery_distribution, EmpiricalDistribution, GeneratingSet};
use scenery::stats::{clt_ensemble, gibbs_equivalence_audit, markov_asymptotic_variance, random_prefixes};
use scenery::transport::distribution_distance;
use scenery::{MeasureModel, PastWord, Word};
use serde_json::Value;

const SEED: u64 = 42;

const BERNOULLI: &str = r#"{"type": "bernoulli", "p": [0.7, 0.3]}"#;
const M_STAR: &str = r#"{"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]}"#;
const GIBBS3: &str = r#"{"type": "block_gibbs", "r": 3, "phi": [[[0.0, 0.5], [-0.3, 0.8]], [[0.4, -0.6], [0.2, 0.1]]]}"#;
const MIXTURE: &str = r#"{"type": "mixture", "weights": [0.5, 0.5], "components": [
    {"type": "bernoulli", "p": [0.9, 0.1]}, {"type": "bernoulli", "p": [0.1, 0.9]}]}"#;

struct Outcome {
    passed: bool,
    detail: String,
    /// False for criteria that cannot hold as written.
    asserted: bool,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail, asserted: true }
}

fn m_star() -> MeasureModel {
    MeasureModel::markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
}

fn bernoulli() -> MeasureModel {
    MeasureModel::bernoulli(vec![0.7, 0.3]).unwrap()
}

fn bundled() -> Vec<(&'static str, MeasureModel)> {
    let log_m: Vec<f64> = [0.9f64, 0.1, 0.2, 0.8].iter().map(|p| p.ln()).collect();
    vec![
        ("bernoulli", bernoulli()),
        ("markov", m_star()),
        ("gibbs_log_markov", MeasureModel::block_gibbs(2, 2, log_m).unwrap()),
        ("gibbs_zero", MeasureModel::block_gibbs(2, 2, vec![0.0; 4]).unwrap()),
        (
            "mixture",
            MeasureModel::mixture(
                vec![0.5, 0.5],
                vec![MeasureModel::bernoulli(vec![0.9, 0.1]).unwrap(), MeasureModel::bernoulli(vec![0.1, 0.9]).unwrap()],
            )
            .unwrap(),
        ),
    ]
}

fn set(e: &[u8], a: f64, b: f64) -> GeneratingSet {
    GeneratingSet::new(Word::from_symbols(e.to_vec()), a, b).unwrap()
}

fn experiment(dir: &Path, model: &str, extra: &str, cmd: Command, threads: usize) -> (bool, Value) {
    let text = format!(r#"{{"model": {model}, "seed": {SEED}{extra}}}"#);
    let run = Run::from_json(&text, None, dir).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| run.execute(cmd)).unwrap();
    let report = out.files.iter().find(|f| f.extension().is_some_and(|x| x == "json")).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    (out.passed, v["report"].clone())
}

/// The runs behind criteria 2 to 4, also replayed for determinism.
fn table_runs() -> Vec<(&'static str, &'static str, String, Command)> {
    vec![
        ("usm_bernoulli", BERNOULLI, r#", "usm": {"trajectories": 3, "max_n": 10000}"#.into(), Command::VerifyUsm),
        ("usm_markov", M_STAR, r#", "usm": {"max_n": 100000}"#.into(), Command::VerifyUsm),
        ("q_markov", M_STAR, String::new(), Command::VerifyQ),
        ("q_gibbs3", GIBBS3, String::new(), Command::VerifyQ),
    ]
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (name, m) in bundled() {
        let r = validate_measure(&m, 6);
        worst = worst.max(r.worst_residual);
        if !r.passed || r.depth < 6 {
            failed.push(name);
        }
    }
    outcome(failed.is_empty(), format!("5 models to depth 6, worst residual {worst:.2e}, failures {failed:?}"))
}

fn criterion_2(root: &Path) -> Outcome {
    let m = bernoulli();
    let mu = measure_vector(&m, 3).unwrap();
    let delta = EmpiricalDistribution::dirac(mu.clone());
    let mut worst_vec = 0.0f64;
    let mut worst_dist = 0.0f64;
    let mut single = true;
    for seed in 0..20 {
        let t = sample_future(&m, 10_000, seed).unwrap();
        for n in [1, 2, 10, 100, 1000, 10_000] {
            let d = scenery_distribution(&m, t.future.symbols(), n, 3).unwrap();
            single &= d.len() == 1;
            worst_vec = worst_vec.max(d.atoms()[0].vector.sup_diff(&mu));
            worst_dist = worst_dist.max(distribution_distance(&d, &delta).unwrap());
        }
    }
    let (passed, report) = experiment(&root.join("usm_bernoulli"), BERNOULLI, &table_runs()[0].2, Command::VerifyUsm, 4);
    let table_dist = report["final_max_distance"].as_f64().unwrap();
    outcome(
        single && worst_vec < 1e-12 && worst_dist < 1e-9 && passed && table_dist < 1e-9,
        format!("single atom {single}, vector error {worst_vec:.1e}, distance {worst_dist:.1e}"),
    )
}

fn criterion_3(root: &Path) -> Outcome {
    let m = m_star();
    let t = sample_future(&m, 100_000, SEED).unwrap();
    let d1 = scenery_distribution(&m, t.future.symbols(), 100_000, 1).unwrap();
    let rows = [([0.9, 0.1], 2.0 / 3.0), ([0.2, 0.8], 1.0 / 3.0)];
    // The n = 0 term is mu itself, carrying weight 1/N.
    let mu = measure_vector(&m, 1).unwrap();
    let start = d1.atoms().iter().filter(|a| a.vector.sup_diff(&mu) < 1e-12).map(|a| a.weight).sum::<f64>();
    let mut ok = d1.len() == 3 && (start - 1e-5).abs() < 1e-15;
    let mut weights = Vec::new();
    for (row, w) in rows {
        match d1.atoms().iter().find(|a| (a.vector.probs()[0] - row[0]).abs() < 1e-12 && (a.vector.probs()[1] - row[1]).abs() < 1e-12) {
            Some(a) => {
                ok &= (a.weight - w).abs() < 0.01;
                weights.push(a.weight);
            }
            None => ok = false,
        }
    }
    let (_, report) = experiment(&root.join("usm_markov"), M_STAR, &table_runs()[1].2, Command::VerifyUsm, 4);
    let dist = report["final_max_distance"].as_f64().unwrap();
    let exact = first_level_blowups(&m, 1).unwrap();
    let dist1 = distribution_distance(&d1, &exact).unwrap();
    outcome(
        ok && dist < 0.01 && dist1 < 0.01,
        format!("row atoms weighted {weights:.4?} plus mu at {start:.0e}, distance depth 1 {dist1:.2e}, depth 3 {dist:.2e}"),
    )
}

fn criterion_4(root: &Path) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, model) in [("q_markov", M_STAR), ("q_gibbs3", GIBBS3)] {
        let (ok, report) = experiment(&root.join(name), model, "", Command::VerifyQ, 4);
        let entries = report["entries"].as_array().unwrap();
        let worst = entries.iter().map(|e| e["delta_scenery_exact"].as_f64().unwrap().abs()).fold(0.0, f64::max);
        let depth_ok = entries.iter().all(|e| e["e"].as_array().unwrap().len() <= 3);
        passed &= ok && entries.len() == 20 && depth_ok;
        parts.push(format!(
            "{name}: max |scenery - exact| {worst:.4}, Monte Carlo {}/20",
            report["montecarlo_within_gate"]
        ));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for (i, (_, m)) in bundled().into_iter().enumerate() {
        let prefixes = random_prefixes(&m, 10_000, 1, 20, 1000 + i as u64);
        let mut rng = rng_from_seed(2000 + i as u64);
        for p in prefixes {
            let len = rng.random_range(1..=3);
            let e: Vec<u8> = (0..len).map(|_| rng.random_range(0..2u8)).collect();
            let ratio = minimeasure(&m, &p, len).unwrap().prob(&e).unwrap();
            let ctx = PastContext::new(&m, PastWord::from_symbols(p)).unwrap();
            let g = ctx.g_e_n(&e).unwrap();
            let tel = ctx.g_e_telescoped(&e).unwrap();
            worst = worst.max((ratio - g).abs()).max((g - tel).abs()).max((ratio - tel).abs());
            if m.is_ergodic() && ctx.window().len() >= m.ergodic_chain().unwrap().memory() {
                worst = worst.max((ctx.g_e_limit(&e).unwrap() - g).abs());
            }
            cases += 1;
        }
    }
    outcome(worst < 1e-10, format!("{cases} pairs, worst disagreement {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, (name, m)) in bundled().into_iter().enumerate() {
        if !m.fully_supported() || !m.is_ergodic() {
            continue;
        }
        let prefixes = random_prefixes(&m, 500, 1, 50, 3000 + i as u64);
        let r = gibbs_equivalence_audit(&m, &prefixes, 6).unwrap();
        passed &= r.passed;
        if name == "bernoulli" {
            passed &= (r.min_ratio - 1.0).abs() < 1e-12 && (r.max_ratio - 1.0).abs() < 1e-12;
        }
        parts.push(format!("{name}: [{:.4}, {:.4}] C={:.4}", r.min_ratio, r.max_ratio, r.bound));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_7_iid() -> Outcome {
    let m = bernoulli();
    let mu0 = measure_vector(&m, 1).unwrap().probs()[0];
    let literal = clt_ensemble(&m, &set(&[0], 0.5, 0.9), 10_000, 300, SEED);
    // Lumpable chain whose indicator process is i.i.d. with Q = 0.7.
    let lumped = MeasureModel::markov(vec![vec![0.4, 0.3, 0.3], vec![0.5, 0.2, 0.3], vec![0.1, 0.6, 0.3]]).unwrap();
    let r = clt_ensemble(&lumped, &set(&[0], 0.3, 0.6), 10_000, 300, SEED).unwrap();
    let substitute = r.passes(0.21, 0.1, 0.25) && (r.q - 0.7).abs() < 1e-12 && (r.sigma2_chain - 0.21).abs() < 1e-9;
    Outcome {
        passed: false,
        asserted: false,
        detail: format!(
            "unattainable as written: Bernoulli scenery is the point mass at mu (p0 = {mu0}), so Q(U) is 0 or 1, never 0.7 \
             (clt_ensemble: {}); i.i.d. substitute via lumpable 3-state chain Q={:.3}: mean {:.4}, variance {:.4} vs 0.21 -> {}",
            literal.err().map(|e| e.to_string()).unwrap_or_else(|| "accepted".into()),
            r.q,
            r.sample_mean,
            r.sample_variance,
            if substitute { "PASS" } else { "FAIL" }
        ),
    }
}

fn criterion_7_markov() -> Outcome {
    let m = m_star();
    let u = set(&[0], 0.5, 0.95);
    let r = clt_ensemble(&m, &u, 10_000, 300, SEED).unwrap();
    let target = markov_asymptotic_variance(&m, &u).unwrap();
    outcome(
        r.passes(target, 0.1, 0.25) && r.iid_variance_mismatch,
        format!(
            "Q={:.4}, mean {:.4}, variance {:.4} vs sigma2_chain {:.4} (Q - Q^2 = {:.4}, deviation {:+.0}% flagged {})",
            r.q,
            r.sample_mean,
            r.sample_variance,
            r.sigma2_chain,
            r.sigma2_iid,
            100.0 * r.iid_deviation,
            r.iid_variance_mismatch
        ),
    )
}

fn criterion_8(root: &Path) -> Outcome {
    let (passed, r) = experiment(&root.join("nonergodic"), MIXTURE, "", Command::DemoNonergodic, 4);
    outcome(
        passed && r["trajectories"] == 50,
        format!(
            "max distance to own Q {:.4}, center separation {:.4}, verdict {}",
            r["max_distance_to_own_component"].as_f64().unwrap(),
            r["min_center_distance"].as_f64().unwrap(),
            r["verdict"]
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
}

fn criterion_9(root: &Path) -> Outcome {
    let mut identical = 0;
    let mut differing = Vec::new();
    for (name, model, extra, cmd) in table_runs() {
        let replay = root.join(format!("{name}_t1"));
        experiment(&replay, model, &extra, cmd, 1);
        let original = csv_files(&root.join(name));
        let again = csv_files(&replay);
        if original.len() != again.len() || original.is_empty() {
            differing.push(name.to_string());
        }
        for (a, b) in original.iter().zip(&again) {
            if fs::read(a).unwrap() == fs::read(b).unwrap() {
                identical += 1;
            } else {
                differing.push(a.display().to_string());
            }
        }
    }
    outcome(differing.is_empty(), format!("{identical} tables byte-identical across 4 and 1 threads, differing {differing:?}"))
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let root = root.path();
    type Check<'a> = (&'a str, Duration, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("1", Duration::from_secs(5), Box::new(criterion_1)),
        ("2", Duration::from_secs(5), Box::new(|| criterion_2(root))),
        ("3", Duration::from_secs(30), Box::new(|| criterion_3(root))),
        ("4", Duration::from_secs(120), Box::new(|| criterion_4(root))),
        ("5", Duration::from_secs(10), Box::new(criterion_5)),
        ("6", Duration::from_secs(30), Box::new(criterion_6)),
        ("7(i)", Duration::from_secs(180), Box::new(criterion_7_iid)),
        ("7(ii)", Duration::from_secs(180), Box::new(criterion_7_markov)),
        ("8", Duration::from_secs(60), Box::new(|| criterion_8(root))),
        ("9", Duration::from_secs(300), Box::new(|| criterion_9(root))),
    ];
    let mut broken = Vec::new();
    for (id, budget, check) in &checks {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let ok = o.passed && took <= *budget;
        println!(
            "{} criterion {id}: {} [{:.2}s of {}s]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
        if !ok && o.asserted {
            broken.push(*id);
        }
    }
    if !broken.is_empty() {
        eprintln!("failed criteria: {broken:?}");
        std::process::exit(1);
    }
}
