use std::collections::HashMap;

use gocoma::classifier::{HeadKind, TrainConfig};
use gocoma::data::splits::official_from_mapping;
use gocoma::data::{
    ingest, make_splits, read_records, synth_generate, write_records, Dataset, DatasetManifest,
    EmbeddingRecord, Prescale, SplitSpec, Splits, SynthConfig,
};
use gocoma::experiment::{
    report, run_experiment, ExperimentConfig, ExperimentResult, FusionMode, MeanStd,
};
use gocoma::Modality;

fn synth(n: usize, depth: usize, noise: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n_samples: n,
        n_classes: 4,
        t_code: 4,
        t_img: 4,
        d_code: 12,
        d_img: 12,
        depth,
        noise,
        seed,
    }
}

fn dataset(cfg: &SynthConfig) -> Dataset {
    let (records, names) = synth_generate(cfg).unwrap();
    ingest(records, Some(names)).unwrap()
}

fn quick() -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            epochs: 4,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        d_model: 12,
        max_folds: Some(2),
        ..ExperimentConfig::default()
    }
}

#[test]
fn synthetic_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(60, 2, 0.5, 11);
    let (a, names) = synth_generate(&cfg).unwrap();
    let (b, _) = synth_generate(&cfg).unwrap();
    write_records(&a, &dir.path().join("a.embr")).unwrap();
    write_records(&b, &dir.path().join("b.embr")).unwrap();
    let bytes = std::fs::read(dir.path().join("a.embr")).unwrap();
    assert_eq!(bytes, std::fs::read(dir.path().join("b.embr")).unwrap());
    assert_eq!(read_records(&dir.path().join("a.embr")).unwrap(), a);
    assert_eq!(names.len(), 4);
    let (c, _) = synth_generate(&SynthConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn stratified_folds_are_balanced_within_one() {
    let ds = dataset(&synth(203, 2, 0.5, 1));
    let splits = make_splits(&ds.labeled_ids(), &SplitSpec::stratified(5)).unwrap();
    let Splits::Stratified5cv { folds, test } = &splits else {
        panic!()
    };
    let label: HashMap<&str, usize> = ds
        .samples
        .iter()
        .map(|s| (s.id.as_str(), s.label))
        .collect();
    for y in 0..4 {
        let n_c = ds.samples.iter().filter(|s| s.label == y).count();
        let in_test = test.iter().filter(|i| label[i.as_str()] == y).count();
        assert_eq!(in_test, (0.2 * n_c as f64).round() as usize);
        let per: Vec<usize> = folds
            .iter()
            .map(|f| f.iter().filter(|i| label[i.as_str()] == y).count())
            .collect();
        assert!(
            per.iter().max().unwrap() - per.iter().min().unwrap() <= 1,
            "class {y}: {per:?}"
        );
    }
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    splits.validate(&ds).unwrap();
    assert_eq!(
        splits,
        make_splits(&ds.labeled_ids(), &SplitSpec::stratified(5)).unwrap()
    );
}

#[test]
fn official_split_from_mapping() {
    let ds = dataset(&synth(20, 1, 0.1, 2));
    let ids: Vec<String> = ds.samples.iter().map(|s| s.id.clone()).collect();
    let mapping: HashMap<String, String> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (
                id.clone(),
                ["train", "train", "valid", "test"][i % 4].to_string(),
            )
        })
        .collect();
    let splits = official_from_mapping(&ids, &mapping).unwrap();
    let Splits::Official { train, val, test } = &splits else {
        panic!()
    };
    assert_eq!((train.len(), val.len(), test.len()), (10, 5, 5));

    let mut bad = mapping.clone();
    bad.insert(ids[0].clone(), "dev".into());
    assert!(official_from_mapping(&ids, &bad).is_err());
    let mut extra = mapping.clone();
    extra.insert("ghost".into(), "train".into());
    assert!(official_from_mapping(&ids, &extra).is_err());
    assert!(official_from_mapping(&ids, &HashMap::new()).is_err());
}

#[test]
fn prescale_uses_only_training_ids() {
    let ds = dataset(&synth(40, 2, 0.5, 3));
    let splits = make_splits(&ds.labeled_ids(), &SplitSpec::official(0)).unwrap();
    let p = Prescale::from_training(&ds, &splits.training_portion()).unwrap();
    let train = splits.training_portion();
    let max = |f: fn(&gocoma::data::Sample) -> &Vec<Vec<f64>>| {
        ds.samples
            .iter()
            .filter(|s| train.contains(&s.id))
            .flat_map(|s| {
                f(s).iter()
                    .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            })
            .fold(0.0, f64::max)
    };
    assert_eq!(p.code, 1.0 + max(|s| &s.code));
    assert_eq!(p.image, 1.0 + max(|s| &s.img));
    let scaled = ds.prescaled(&p);
    let biggest = scaled
        .samples
        .iter()
        .filter(|s| train.contains(&s.id))
        .flat_map(|s| {
            s.code
                .iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .fold(0.0, f64::max);
    assert!(biggest < 1.0);
}

fn rec(id: &str, label: u32, m: Modality, d: usize) -> EmbeddingRecord {
    EmbeddingRecord::new(id.into(), label, m, vec![vec![0.5; d]; 2]).unwrap()
}

#[test]
fn ingest_rejects_inconsistent_records() {
    let ok = vec![
        rec("a", 0, Modality::Code, 3),
        rec("a", 0, Modality::Image, 2),
    ];
    let ds = ingest(ok.clone(), None).unwrap();
    assert_eq!((ds.d_code(), ds.d_img(), ds.class_names.len()), (3, 2, 1));

    let missing = vec![rec("a", 0, Modality::Code, 3)];
    assert!(ingest(missing, None).is_err());
    let dup = [ok.clone(), vec![rec("a", 0, Modality::Code, 3)]].concat();
    assert!(ingest(dup, None).is_err());
    let labels = vec![
        rec("a", 0, Modality::Code, 3),
        rec("a", 1, Modality::Image, 2),
    ];
    assert!(ingest(labels, None).is_err());
    let dims = [
        ok.clone(),
        vec![
            rec("b", 0, Modality::Code, 4),
            rec("b", 0, Modality::Image, 2),
        ],
    ]
    .concat();
    assert!(ingest(dims, None).is_err());
    let names = vec![
        rec("a", 2, Modality::Code, 3),
        rec("a", 2, Modality::Image, 2),
    ];
    assert!(ingest(names, Some(vec!["x".into(), "y".into()])).is_err());
    assert!(ingest(Vec::new(), None).is_err());
}

#[test]
fn manifest_reloads_the_same_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (records, names) = synth_generate(&synth(30, 2, 0.3, 4)).unwrap();
    write_records(&records, &dir.path().join("r.embr")).unwrap();
    let ds = ingest(records, Some(names)).unwrap();
    let mut m = DatasetManifest::describe(&ds, vec!["r.embr".into()]);
    let splits = make_splits(&ds.labeled_ids(), &SplitSpec::official(1)).unwrap();
    m.set_splits(&ds, splits).unwrap();
    let path = dir.path().join("manifest.json");
    m.save(&path).unwrap();
    let back = DatasetManifest::load(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.load_dataset(&path).unwrap(), ds);
}

#[test]
fn results_reparse_and_report_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(&synth(120, 2, 0.4, 5));
    let splits = make_splits(&ds.labeled_ids(), &SplitSpec::stratified(0)).unwrap();
    let p = Prescale::from_training(&ds, &splits.training_portion()).unwrap();
    let mut results = Vec::new();
    for mode in [FusionMode::Gcsa, FusionMode::Concat] {
        let (r, _) = run_experiment(&ds, &splits, &p, mode, &quick()).unwrap();
        assert_eq!(r.folds.len(), 2);
        let path = dir.path().join(format!("{mode}.json"));
        r.save(&path).unwrap();
        assert_eq!(ExperimentResult::load(&path).unwrap(), r);
        assert_eq!(
            r.history_jsonl().unwrap().lines().count(),
            r.folds.iter().map(|f| f.history.len()).sum::<usize>()
        );
        results.push(r);
    }
    let rep = report(&results).unwrap();
    assert_eq!(rep.rows[0].method, FusionMode::Concat);
    for row in &rep.rows {
        let r = results.iter().find(|r| r.method == row.method).unwrap();
        let acc: Vec<f64> = r.folds.iter().map(|f| f.test.accuracy).collect();
        let mean = (acc[0] + acc[1]) / 2.0;
        let std = ((acc[0] - mean).powi(2) + (acc[1] - mean).powi(2)).sqrt();
        assert!((row.test_accuracy.mean - mean).abs() < 1e-12);
        assert!((row.test_accuracy.std - std).abs() < 1e-12);
        assert_eq!(row.folds, 2);
    }
    assert_eq!(MeanStd::of(&[]).n, 0);
}

#[test]
fn code_only_model_fits_clean_data() {
    let ds = dataset(&synth(200, 1, 0.0, 6));
    let splits = make_splits(&ds.labeled_ids(), &SplitSpec::official(0)).unwrap();
    let p = Prescale::from_training(&ds, &splits.training_portion()).unwrap();
    let cfg = ExperimentConfig {
        train: TrainConfig {
            epochs: 25,
            learning_rate: 1e-3,
            patience: 25,
            ..TrainConfig::default()
        },
        d_model: 16,
        head: Some(HeadKind::Fcn),
        ..ExperimentConfig::default()
    };
    let (r, _) = run_experiment(&ds, &splits, &p, FusionMode::Code, &cfg).unwrap();
    assert!(
        r.folds[0].train.accuracy >= 99.0,
        "train accuracy {}",
        r.folds[0].train.accuracy
    );
}
