//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use accinterp::data::{planted, write_csv, Dataset};
use accinterp::explain::{mdi_global, shap_exact, shap_permutations, DEFAULT_EXACT_CAP};
use accinterp::harness::{
    aggregate_curves, run_experiment, AggregateConfig, DatasetSection, ExperimentConfig,
    ExperimentSection, MethodSpec, RankScope, RunOptions,
};
use accinterp::models::{
    fit_additive, fit_boosted, fit_forest, fit_logistic, fit_tree, AdditiveConfig,
    BoostedConfig, Classifier, DecisionTree, FittedModel, ForestConfig, LogisticConfig, Node,
    TreeConfig,
};
use accinterp::rankmetrics::{
    bucketize, kendall_tau, p_mode, stability, weighted_tau_distance, AccuracyBucket, PairWeight,
};
use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn head(d: &Dataset, n: usize) -> Array2<f64> {
    d.features().slice(s![..n, ..]).to_owned()
}

fn six_feature_models() -> (Dataset, Vec<(&'static str, Box<dyn Classifier>)>) {
    let d = planted(300, 6, 3, 0.1, 21).unwrap();
    let forest = ForestConfig {
        n_trees: 25,
        ..ForestConfig::default()
    };
    let models: Vec<(&str, Box<dyn Classifier>)> = vec![
        ("logistic", Box::new(fit_logistic(&d, &LogisticConfig::default()).unwrap())),
        ("tree", Box::new(fit_tree(&d, &TreeConfig::default()))),
        ("forest", Box::new(fit_forest(&d, &forest, 5).unwrap())),
        ("boosted", Box::new(fit_boosted(&d, &BoostedConfig::default()).unwrap())),
        ("additive", Box::new(fit_additive(&d, &AdditiveConfig::default()).unwrap())),
    ];
    (d, models)
}

fn random_instances(p: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-1.2..1.2)).collect())
        .collect()
}

fn c1() -> Check {
    let d = kendall_tau(&["A", "B", "C"], &["B", "A", "C"]).map_err(|e| e.to_string())?;
    ensure(d == 1.0 / 3.0, format!("got {d}"))?;
    Ok(format!("distance = {d}"))
}

fn c2() -> Check {
    let base: Vec<usize> = (0..10).collect();
    let same = stability(&[base.clone(), base.clone(), base.clone()], 10).unwrap().value;
    let mut rev = base.clone();
    rev.reverse();
    let opposite = stability(&[base.clone(), rev], 10).unwrap().value;
    let short = stability(&[vec![0, 1, 2], vec![2, 1, 0]], 10).unwrap().value;
    ensure(same == 1.0, format!("identical -> {same}"))?;
    ensure(opposite == 0.0, format!("reversal -> {opposite}"))?;
    ensure(short == 0.0, format!("short reversal -> {short}"))?;
    Ok("identical 1.0, reversal 0.0".into())
}

fn c3() -> Check {
    let (d, models) = six_feature_models();
    let background = head(&d, 20);
    let instances = random_instances(6, 20, 3);
    let mut worst: f64 = 0.0;
    for (name, m) in &models {
        for x in &instances {
            let e = shap_exact(m.as_ref(), x, &background, DEFAULT_EXACT_CAP)
                .map_err(|e| format!("{name}: {e}"))?;
            let err = (e.total() - m.explained_output(x)).abs();
            ensure(err <= 1e-6, format!("{name}: local accuracy off by {err}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("{} models x 20 instances, max error {worst:.1e}", models.len()))
}

fn c4() -> Check {
    let d = planted(300, 6, 3, 0.1, 22).unwrap();
    let m = fit_logistic(&d, &LogisticConfig::default()).unwrap();
    let background = head(&d, 20);
    let (mu, sd) = (m.standardizer().mean(), m.standardizer().std());
    let z = |v: f64, j: usize| (v - mu[j]) / sd[j];
    let mut worst: f64 = 0.0;
    for x in random_instances(6, 20, 4) {
        let e = shap_exact(&m, &x, &background, DEFAULT_EXACT_CAP).unwrap();
        for j in 0..6 {
            let bg_mean = background.column(j).iter().map(|&v| z(v, j)).sum::<f64>() / 20.0;
            let oracle = m.coefficients()[j] * (z(x[j], j) - bg_mean);
            worst = worst.max((e.values[j] - oracle).abs());
        }
    }
    ensure(worst <= 1e-6, format!("max deviation {worst}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn all_orderings(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_orderings(p - 1) {
        for pos in 0..=rest.len() {
            let mut o = rest.clone();
            o.insert(pos, p - 1);
            out.push(o);
        }
    }
    out
}

fn c5() -> Check {
    let d = planted(200, 3, 2, 0.1, 23).unwrap();
    let forest = ForestConfig {
        n_trees: 15,
        ..ForestConfig::default()
    };
    let models: Vec<FittedModel> = vec![
        FittedModel::Logistic(fit_logistic(&d, &LogisticConfig::default()).unwrap()),
        FittedModel::Forest(fit_forest(&d, &forest, 1).unwrap()),
        FittedModel::Boosted(fit_boosted(&d, &BoostedConfig::default()).unwrap()),
    ];
    let orderings = all_orderings(3);
    ensure(orderings.len() == 6, "expected 3! orderings")?;
    let background = head(&d, 15);
    let mut worst: f64 = 0.0;
    for m in &models {
        for x in random_instances(3, 10, 5) {
            let exact = shap_exact(m, &x, &background, DEFAULT_EXACT_CAP).unwrap();
            let sampled = shap_permutations(m, &x, &background, &orderings).unwrap();
            for (a, b) in exact.values.iter().zip(&sampled.values) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-9, format!("max deviation {worst}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn c6() -> Check {
    let d = planted(300, 6, 2, 0.1, 24).unwrap();
    let tree = fit_tree(&d, &TreeConfig::default());
    let forest = fit_forest(&d, &ForestConfig { n_trees: 20, ..ForestConfig::default() }, 2).unwrap();
    let boosted = fit_boosted(&d, &BoostedConfig::default()).unwrap();
    let sums = [
        ("tree", mdi_global(&tree).scores().iter().sum::<f64>()),
        ("forest", mdi_global(&forest).scores().iter().sum::<f64>()),
        ("boosted", mdi_global(&boosted).scores().iter().sum::<f64>()),
    ];
    for (name, s) in sums {
        ensure((s - 1.0).abs() <= 1e-9, format!("{name} sums to {s}"))?;
    }
    let stump = DecisionTree::from_nodes(
        vec![
            Node::split(3, 0.0, 1, 2, 10, 0.48),
            Node::leaf(0.0, 6, 0.0),
            Node::leaf(1.0, 4, 0.0),
        ],
        5,
    )
    .unwrap();
    let v = mdi_global(&stump);
    ensure(v.scores() == [0.0, 0.0, 0.0, 1.0, 0.0], format!("stump -> {:?}", v.scores()))?;
    Ok("sums within 1e-9; stump puts 1.0 on its split feature".into())
}

/// Tuple frequencies by a plain linear scan.
fn brute_force_counts(rankings: &[Vec<usize>]) -> Vec<(Vec<usize>, usize)> {
    let mut counts: Vec<(Vec<usize>, usize)> = Vec::new();
    for r in rankings {
        let t = r[..3].to_vec();
        match counts.iter_mut().find(|(k, _)| *k == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts
}

fn c7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let p = rng.gen_range(3..7);
        let n = rng.gen_range(1..40);
        // a small pool of rankings so tuples repeat
        let pool: Vec<Vec<usize>> = (0..rng.gen_range(1..6))
            .map(|_| {
                let mut r: Vec<usize> = (0..p).collect();
                r.shuffle(&mut rng);
                r
            })
            .collect();
        let rankings: Vec<Vec<usize>> =
            (0..n).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
        let t = p_mode(&rankings).map_err(|e| e.to_string())?;
        let counts = brute_force_counts(&rankings);
        let max = counts.iter().map(|(_, c)| *c).max().unwrap();
        ensure(
            t.value == max as f64 / n as f64,
            format!("set {trial}: pMode {} vs max frequency {}", t.value, max as f64 / n as f64),
        )?;
        for (tuple, c) in &counts {
            ensure(t.value >= *c as f64 / n as f64, format!("set {trial}: {tuple:?} exceeds pMode"))?;
        }
        ensure(t.value >= 1.0 / n as f64, format!("set {trial}: below 1/N"))?;

        let same = vec![rankings[0].clone(); n];
        ensure(p_mode(&same).unwrap().value == 1.0, format!("set {trial}: identical != 1"))?;

        // all-distinct: distinct leading triples over 8 features
        let mut seen = HashMap::new();
        let mut distinct = Vec::new();
        while distinct.len() < n.min(20) {
            let mut r: Vec<usize> = (0..8).collect();
            r.shuffle(&mut rng);
            if seen.insert(r[..3].to_vec(), ()).is_none() {
                distinct.push(r);
            }
        }
        let v = p_mode(&distinct).unwrap().value;
        ensure(v == 1.0 / distinct.len() as f64, format!("set {trial}: distinct -> {v}"))?;
    }
    Ok("200 random sets agree with the brute-force counter".into())
}

fn c8() -> Check {
    use AccuracyBucket::*;
    let cases = [
        (0.49, None),
        (0.5, Some(Low)),
        (0.649, Some(Low)),
        (0.65, Some(Medium)),
        (0.799, Some(Medium)),
        (0.8, Some(High)),
        (1.0, Some(High)),
    ];
    for (f1, want) in cases {
        ensure(bucketize(f1) == want, format!("{f1} -> {:?}, want {want:?}", bucketize(f1)))?;
    }
    Ok("7 edge values bucketed as documented".into())
}

/// Spearman correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn trend_config() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSection {
            path: "planted.csv".into(),
            label_column: "y".into(),
            id: Some("planted".into()),
        },
        experiment: ExperimentSection {
            replicates: 50,
            seed: 2024,
            methods: vec![
                MethodSpec::LogisticRcm,
                MethodSpec::ForestMdi,
                MethodSpec::BoostedMdi,
                MethodSpec::AdditiveSelf,
            ],
            ..ExperimentSection::default()
        },
        explain: Default::default(),
        models: Default::default(),
    }
}

fn c9_c10() -> (Check, Check) {
    let d = planted(1000, 10, 2, 0.1, 99).unwrap();
    let cfg = trend_config();
    let out = match run_experiment(&cfg, &d, &RunOptions { jobs: 0 }) {
        Ok(o) => o,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let curves = aggregate_curves(&out.records, &AggregateConfig::from(&cfg));
    let global = |m: MethodSpec| -> Vec<(f64, f64, f64)> {
        curves
            .rows
            .iter()
            .filter(|r| r.method == m && r.scope == RankScope::Global)
            .map(|r| (r.proportion, r.mean_f1, r.stability))
            .collect()
    };

    let c9 = (|| {
        ensure(out.n_failed() == 0, format!("{} trials failed", out.n_failed()))?;
        let mut parts = Vec::new();
        for m in &cfg.experiment.methods {
            let rows = global(*m);
            ensure(rows.len() == 10, format!("{m}: {} cells", rows.len()))?;
            let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let f1: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let rho = spearman(&p, &f1);
            ensure(rho > 0.5, format!("{}: rho = {rho:.3}", m.model().as_str()))?;
            parts.push(format!("{} {rho:.2}", m.model().as_str()));
        }
        Ok(format!("rho: {}", parts.join(", ")))
    })();

    let c10 = (|| {
        let rows = global(MethodSpec::LogisticRcm);
        let at = |p: f64| rows.iter().find(|r| r.0 == p).map(|r| r.2);
        let (lo, hi) = (at(0.1).ok_or("no p=0.1 cell")?, at(1.0).ok_or("no p=1.0 cell")?);
        ensure(hi > lo, format!("stability {hi:.4} at p=1.0 vs {lo:.4} at p=0.1"))?;
        Ok(format!("WKT10 {lo:.4} at p=0.1 -> {hi:.4} at p=1.0"))
    })();
    (c9, c10)
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_accinterp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ACCINTERP_OUTPUT_ROOT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn c11() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let d = planted(160, 5, 2, 0.1, 31).unwrap();
    write_csv(&d, root.join("planted.csv"), "y").map_err(|e| e.to_string())?;
    std::fs::write(
        root.join("config.toml"),
        "[dataset]\npath = \"planted.csv\"\nlabel_column = \"y\"\n\n\
         [experiment]\nproportions = [0.5, 1.0]\nreplicates = 3\nprobes = 2\nseed = 5\n\n\
         [explain]\nbackground = 8\nglobal_instances = 4\nshap_permutations = 20\n\n\
         [explain.lime]\nn_samples = 100\n\n\
         [models.forest]\nn_trees = 8\n\n[models.boosted]\nrounds = 15\n",
    )
    .map_err(|e| e.to_string())?;
    run_cli(&["run", "--config", "config.toml", "--out", "first", "--jobs", "1"], root)?;
    let manifest = root.join("first/manifest.toml");
    let manifest = manifest.to_str().ok_or("non-utf8 path")?;
    run_cli(&["run", "--config", manifest, "--out", "second", "--jobs", "1"], root)?;
    run_cli(&["run", "--config", manifest, "--out", "third", "--jobs", "3"], root)?;
    let read = |name: &str| std::fs::read(root.join(name).join("records.jsonl")).map_err(|e| e.to_string());
    let (a, b, c) = (read("first")?, read("second")?, read("third")?);
    ensure(!a.is_empty(), "empty records")?;
    ensure(a == b, "records differ between runs")?;
    ensure(a == c, "records differ between --jobs 1 and --jobs 3")?;
    let lines = a.iter().filter(|&&b| b == b'\n').count();
    Ok(format!("{lines} records identical across 3 runs (jobs 1, 1, 3)"))
}

fn c12() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..500 {
        let n = rng.gen_range(1..=10);
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let w = weighted_tau_distance(&a, &b, None, PairWeight::Uniform).map_err(|e| e.to_string())?;
        let k = kendall_tau(&a, &b).map_err(|e| e.to_string())?;
        ensure(w == k, format!("pair {i}: {w} vs {k}"))?;
    }
    Ok("500 pairs equal exactly".into())
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    // the trend run is the slow one; keep it first so its two lines share it
    let (c9, c10) = guarded(|| Ok(c9_c10()))
        .unwrap_or_else(|e| (Err(e.clone()), Err(e)));
    let results: Vec<(u32, &str, Check)> = vec![
        (1, "Kendall-Tau example", guarded(c1)),
        (2, "WKT10 endpoints", guarded(c2)),
        (3, "Shapley local accuracy", guarded(c3)),
        (4, "linear Shapley oracle", guarded(c4)),
        (5, "sampling consistency at P=3", guarded(c5)),
        (6, "MDI normalization", guarded(c6)),
        (7, "pMode properties", guarded(c7)),
        (8, "bucket edges", guarded(c8)),
        (9, "accuracy trend", c9),
        (10, "stability trend", c10),
        (11, "end-to-end determinism", guarded(c11)),
        (12, "weighted-vs-uniform regression", guarded(c12)),
    ];
    let mut failed = 0;
    for (n, name, result) in &results {
        match result {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
