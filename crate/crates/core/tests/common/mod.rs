//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use cfbench::bench::{DataSource, ExperimentConfig, InstanceCap};
use cfbench::dataset::{Label, LabeledDataset};

/// Shape of a synthetic OULAD export.
#[derive(Debug, Clone, Copy)]
pub struct RawSpec {
    /// Students with a final result of pass, distinction or fail.
    pub students: usize,
    pub withdrawn: usize,
    /// Target pass share among the kept students.
    pub pass_share: f64,
    pub seed: u64,
}

impl RawSpec {
    /// About the size and class balance of the DDD 2013J + 2014J cohort.
    pub fn ddd_like() -> Self {
        RawSpec {
            students: 2300,
            withdrawn: 400,
            pass_share: 0.705,
            seed: 2024,
        }
    }

    pub fn small(students: usize, seed: u64) -> Self {
        RawSpec {
            students,
            withdrawn: students / 10,
            pass_share: 0.7,
            seed,
        }
    }
}

/// Writes studentInfo.csv, studentVle.csv and vle.csv for course DDD
/// (presentations 2013J and 2014J) plus a little noise from course AAA.
///
/// Each student has a latent engagement level. Weekly clicks grow with
/// engagement; failing students tend to fade out after a random week. The
/// label is a noisy function of engagement, so a forest reaches roughly
/// 80% accuracy.
pub fn write_raw_oulad(dir: &Path, spec: RawSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut info = BufWriter::new(File::create(dir.join("studentInfo.csv")).unwrap());
    let mut vle_log = BufWriter::new(File::create(dir.join("studentVle.csv")).unwrap());
    let mut vle = BufWriter::new(File::create(dir.join("vle.csv")).unwrap());

    writeln!(
        info,
        "code_module,code_presentation,id_student,gender,region,highest_education,imd_band,age_band,num_of_prev_attempts,studied_credits,disability,final_result"
    )
    .unwrap();
    writeln!(vle_log, "code_module,code_presentation,id_student,id_site,date,sum_click").unwrap();
    writeln!(vle, "id_site,code_module,code_presentation,activity_type,week_from,week_to").unwrap();
    for site in 0..20 {
        let p = if site % 2 == 0 { "2013J" } else { "2014J" };
        writeln!(vle, "{},DDD,{p},resource,,", 500_000 + site).unwrap();
    }

    // Threshold on the latent score that yields the requested pass share.
    let cut = quantile_of_noisy_score(1.0 - spec.pass_share, &mut ChaCha8Rng::seed_from_u64(spec.seed ^ 1));

    let total = spec.students + spec.withdrawn;
    for s in 0..total {
        let id = 100_000 + s;
        let pres = if s % 2 == 0 { "2013J" } else { "2014J" };
        let engagement: f64 = normal.sample(&mut rng);
        let withdrawn = s >= spec.students;
        let score = engagement + NOISE * normal.sample(&mut rng);
        let result = if withdrawn {
            "Withdrawn"
        } else if score > cut {
            if rng.random::<f64>() < 0.15 {
                "Distinction"
            } else {
                "Pass"
            }
        } else {
            "Fail"
        };
        writeln!(
            info,
            "DDD,{pres},{id},M,Region,HE,10-20%,0-35,0,60,N,{result}"
        )
        .unwrap();

        let never_clicks = rng.random::<f64>() < 0.03;
        if never_clicks {
            continue;
        }
        let fades = withdrawn || rng.random::<f64>() < if result == "Fail" { 0.45 } else { 0.1 };
        let fade_week = if withdrawn {
            rng.random_range(0..15)
        } else {
            rng.random_range(8..38)
        };
        let level = 12.0 * (0.6 * engagement).exp();
        for week in -5i64..=39 {
            let mut mean = level * if week < 0 { 0.3 } else { 1.0 };
            if fades && week >= fade_week {
                mean *= 0.15;
            }
            if rng.random::<f64>() < 0.25 {
                continue;
            }
            let n = Poisson::new(mean.max(0.05)).unwrap().sample(&mut rng) as u64;
            if n == 0 {
                continue;
            }
            // Split the week's clicks over one or two days.
            let first = rng.random_range(0..7);
            let parts = if n > 1 && rng.random::<bool>() { 2 } else { 1 };
            let head = if parts == 2 { n / 2 } else { n };
            let site = 500_000 + rng.random_range(0..20);
            writeln!(vle_log, "DDD,{pres},{id},{site},{},{head}", 7 * week + first).unwrap();
            if parts == 2 {
                let day = 7 * week + rng.random_range(0..7);
                writeln!(vle_log, "DDD,{pres},{id},{site},{day},{}", n - head).unwrap();
            }
        }
    }
    // Another course, which ingestion must ignore.
    for s in 0..30 {
        writeln!(info, "AAA,2013J,{},F,Region,HE,10-20%,0-35,0,60,N,Pass", 900_000 + s).unwrap();
        writeln!(vle_log, "AAA,2013J,{},1,3,5", 900_000 + s).unwrap();
    }
}

/// Spread of the label noise around the engagement score.
const NOISE: f64 = 0.9;

fn quantile_of_noisy_score(q: f64, rng: &mut ChaCha8Rng) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut v: Vec<f64> = (0..20_000)
        .map(|_| normal.sample(rng) + NOISE * normal.sample(rng))
        .collect();
    v.sort_by(f64::total_cmp);
    v[(q * v.len() as f64) as usize]
}

/// The shipped desk-scale config with the data source, seed and output
/// directory replaced.
pub fn desk_config(data: DataSource, out: &Path, master_seed: u64) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    cfg.data = data;
    cfg.run.master_seed = master_seed;
    cfg.run.output_dir = out.to_path_buf();
    cfg
}

/// Tiny settings for runs that only exercise the harness.
pub fn quick_config(data: DataSource, out: &Path, master_seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(data);
    cfg.forest.n_trees = 40;
    cfg.tune.folds = 3;
    cfg.tune.repeats = 1;
    cfg.tune.cv_trees = Some(15);
    cfg.tune.mtry = vec![2, 6];
    cfg.tune.min_node_size = vec![1, 10];
    cfg.moc.population = 20;
    cfg.moc.generations = 8;
    cfg.run.master_seed = master_seed;
    cfg.run.max_explained_instances = InstanceCap::Limit(4);
    cfg.run.output_dir = out.to_path_buf();
    cfg
}

/// Ingests a synthetic OULAD export into `dir` and returns the frame path.
pub fn synthetic_frame(dir: &Path, spec: RawSpec) -> std::path::PathBuf {
    let raw = dir.join("raw");
    std::fs::create_dir_all(&raw).unwrap();
    write_raw_oulad(&raw, spec);
    let frame = cfbench::dataset::ingest_oulad(&raw, "DDD", &["2013J", "2014J"]).unwrap();
    let path = dir.join("frame.csv");
    frame.write_csv(&path).unwrap();
    path
}

/// Small two-feature dataset: pass iff a + b is large, with a little
/// label noise.
pub fn toy_dataset(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(0.0..10.0);
        let b: f64 = rng.random_range(0.0..10.0);
        let noisy = rng.random::<f64>() < 0.05;
        let pass = (a + b > 9.0) ^ noisy;
        rows.push(vec![a.round(), b.round()]);
        labels.push(if pass { Label::Pass } else { Label::Fail });
    }
    LabeledDataset::from_rows(&rows, labels, vec!["a".into(), "b".into()]).unwrap()
}
