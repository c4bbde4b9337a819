use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::detect::persist::{ModelFile, ModelMeta};
use crate::detect::{AdfModel, AutoencoderModel, DetectorKind, RegressionClusteringModel};
use crate::eval::io::{AggregatedRow, RecallRow};
use crate::eval::{
    aggregate_false_cell, calibrate_threshold, export_timeline, label_records, recall_report,
    RecordLabel, ScoredRecord,
};
use crate::features::io::FeatureMeta;
use crate::features::{
    extract_col, extract_dst, extract_xy, fit_neighbor_catalog, impute, FeatureKind,
    FeatureMatrix, ImputedMatrix, NeighborCatalog, ReportRecord,
};
use crate::sim::io::{
    read_reports_csv, read_topology_csv, write_reports_csv, write_topology_csv,
};
use crate::sim::{build_topology, run_scenario, CellSite, MeasurementReport, Pci, Scenario};

use super::{DetectorSpec, Manifest, PipelineConfig, PipelineError};

/// Output paths of one run, all under the configured directory.
struct Layout {
    out: PathBuf,
}

impl Layout {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            out: cfg.out_dir.clone(),
        }
    }

    fn topology(&self) -> PathBuf {
        self.out.join("topology.csv")
    }

    fn manifest(&self) -> PathBuf {
        self.out.join("manifest.toml")
    }

    fn sims(&self) -> PathBuf {
        self.out.join("sims")
    }

    fn training_reports(&self) -> PathBuf {
        self.sims().join("training.csv")
    }

    fn attack_reports(&self, pci: Pci) -> PathBuf {
        self.sims().join(format!("attack_pci{pci}.csv"))
    }

    fn validation_reports(&self, pci: Pci) -> PathBuf {
        self.sims().join(format!("validation_pci{pci}.csv"))
    }

    fn catalogs(&self) -> PathBuf {
        self.out.join("catalogs")
    }

    fn catalog(&self, serving: Pci) -> PathBuf {
        self.catalogs().join(format!("serving_{serving}.toml"))
    }

    fn features(&self) -> PathBuf {
        self.out.join("features")
    }

    fn feature_file(&self, split: &str, serving: Pci, scheme: FeatureKind) -> PathBuf {
        self.features()
            .join(format!("{split}_serving{serving}_{scheme}.csv"))
    }

    fn models(&self) -> PathBuf {
        self.out.join("models")
    }

    fn model(&self, serving: Pci, spec: DetectorSpec) -> PathBuf {
        self.models()
            .join(format!("{}_{}_serving{serving}.json", spec.kind, spec.scheme))
    }

    fn reports(&self) -> PathBuf {
        self.out.join("reports")
    }

    fn scores(&self, spec: DetectorSpec, false_pci: Pci) -> PathBuf {
        self.reports()
            .join(format!("scores_{}_{}_pci{false_pci}.csv", spec.kind, spec.scheme))
    }

    fn recall(&self) -> PathBuf {
        self.reports().join("recall_report.csv")
    }

    fn aggregated(&self) -> PathBuf {
        self.reports().join("aggregated_report.csv")
    }

    fn timeline(&self, spec: DetectorSpec, false_pci: Pci) -> PathBuf {
        self.reports()
            .join(format!("timeline_{}_{}_pci{false_pci}.csv", spec.kind, spec.scheme))
    }
}

fn require(path: &Path, what: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Dependency(format!(
            "{what} missing: {} (run the earlier stage first)",
            path.display()
        )))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct AttackRun {
    pub false_pci: Pci,
    pub validation: Vec<MeasurementReport>,
    pub test: Vec<MeasurementReport>,
}

pub struct SimStage {
    pub topology: Vec<CellSite>,
    pub training: Vec<MeasurementReport>,
    pub runs: Vec<AttackRun>,
}

/// Run the benign training scenario plus one attack and one validation
/// scenario per configured false cell, and write every log.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimStage, PipelineError> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let topology = build_topology(&cfg.training_sim_config().grid);

    log::info!("simulating benign training run ({} phones)", cfg.train.n_ues);
    let training = run_scenario(&cfg.training_sim_config(), &Scenario::Benign)?;

    let mut runs = Vec::new();
    for &pci in &cfg.scenario_pcis {
        let false_pci = Pci(pci);
        let scenario = cfg.attack_scenario(false_pci)?;
        log::info!("simulating attack and validation runs for false cell {false_pci}");
        let test = run_scenario(&cfg.test_sim_config(), &scenario)?;
        let validation = run_scenario(&cfg.validation_sim_config(), &scenario)?;
        runs.push(AttackRun {
            false_pci,
            validation,
            test,
        });
    }

    let stage = SimStage {
        topology,
        training,
        runs,
    };
    write_sim_stage(cfg, &layout, &stage)?;
    Ok(stage)
}

fn write_sim_stage(
    cfg: &PipelineConfig,
    layout: &Layout,
    stage: &SimStage,
) -> Result<(), PipelineError> {
    let max_n = cfg.sim.max_neighbors_per_report;
    let mut buf = Vec::new();
    write_topology_csv(&mut buf, &stage.topology)?;
    write_file(&layout.topology(), &buf)?;

    let mut buf = Vec::new();
    write_reports_csv(&mut buf, &stage.training, max_n)?;
    write_file(&layout.training_reports(), &buf)?;

    for run in &stage.runs {
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &run.test, max_n)?;
        write_file(&layout.attack_reports(run.false_pci), &buf)?;
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &run.validation, max_n)?;
        write_file(&layout.validation_reports(run.false_pci), &buf)?;
    }

    let mut manifest = Manifest::for_config(cfg);
    manifest.record("topology.csv");
    manifest.record("sims/training.csv");
    for run in &stage.runs {
        manifest.record(format!("sims/attack_pci{}.csv", run.false_pci));
        manifest.record(format!("sims/validation_pci{}.csv", run.false_pci));
    }
    manifest.save(&layout.manifest())?;
    Ok(())
}

fn read_sim_stage(cfg: &PipelineConfig, layout: &Layout) -> Result<SimStage, PipelineError> {
    require(&layout.topology(), "topology.csv")?;
    require(&layout.training_reports(), "training report log")?;
    let topology = read_topology_csv(fs::File::open(layout.topology())?)?;
    let training = read_reports_csv(fs::File::open(layout.training_reports())?)?;
    let mut runs = Vec::new();
    for &pci in &cfg.scenario_pcis {
        let false_pci = Pci(pci);
        require(&layout.attack_reports(false_pci), "attack report log")?;
        require(&layout.validation_reports(false_pci), "validation report log")?;
        runs.push(AttackRun {
            false_pci,
            test: read_reports_csv(fs::File::open(layout.attack_reports(false_pci))?)?,
            validation: read_reports_csv(fs::File::open(layout.validation_reports(false_pci))?)?,
        });
    }
    Ok(SimStage {
        topology,
        training,
        runs,
    })
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

fn extract_matrix(
    records: &[ReportRecord],
    catalog: &NeighborCatalog,
    scheme: FeatureKind,
) -> FeatureMatrix {
    match scheme {
        FeatureKind::Col => extract_col(records, catalog),
        FeatureKind::Dst => extract_dst(records, catalog),
        FeatureKind::Xy => extract_xy(records, catalog),
    }
}

pub struct ExtractStage {
    pub catalogs: BTreeMap<Pci, NeighborCatalog>,
    pub training_records: BTreeMap<Pci, Vec<ReportRecord>>,
}

/// Preprocess the simulated logs into per-serving-cell records, fit the
/// neighbor catalogs on training data and write feature matrices for every
/// split, serving cell and needed scheme.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<ExtractStage, PipelineError> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let sims = read_sim_stage(cfg, &layout)?;

    let training_records = crate::features::preprocess(&sims.training);
    let mut catalogs = BTreeMap::new();
    for (&serving, records) in &training_records {
        let catalog = fit_neighbor_catalog(serving, records, &sims.topology)?;
        let text = toml::to_string_pretty(&catalog)
            .map_err(|e| PipelineError::Numerical(e.to_string()))?;
        write_file(&layout.catalog(serving), text.as_bytes())?;
        catalogs.insert(serving, catalog);
    }
    log::info!("fitted {} neighbor catalogs", catalogs.len());

    let schemes = cfg.schemes();
    let write_split = |split: &str,
                           records_by_serving: &BTreeMap<Pci, Vec<ReportRecord>>|
     -> Result<(), PipelineError> {
        for (&serving, records) in records_by_serving {
            let Some(catalog) = catalogs.get(&serving) else {
                log::warn!("serving cell {serving} has no training catalog; skipping {split}");
                continue;
            };
            for &scheme in &schemes {
                let matrix = extract_matrix(records, catalog, scheme);
                let mut buf = Vec::new();
                crate::features::io::write_features_csv(&mut buf, &matrix)?;
                let path = layout.feature_file(split, serving, scheme);
                write_file(&path, &buf)?;
                let meta = FeatureMeta::new(catalog, scheme, cfg.impute);
                meta.save(&path.with_extension("meta.toml"))?;
            }
        }
        Ok(())
    };

    write_split("training", &training_records)?;
    for run in &sims.runs {
        write_split(
            &format!("validation_pci{}", run.false_pci),
            &crate::features::preprocess(&run.validation),
        )?;
        write_split(
            &format!("test_pci{}", run.false_pci),
            &crate::features::preprocess(&run.test),
        )?;
    }

    Ok(ExtractStage {
        catalogs,
        training_records,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// A fitted detector with its calibrated score threshold.
pub enum FittedDetector {
    Adf { model: AdfModel<f64>, threshold: f64 },
    Ae { model: AutoencoderModel<f64>, threshold: f64 },
    Rc { model: RegressionClusteringModel<f64> },
}

impl FittedDetector {
    pub fn score(&self, values: &[f64], missing: &[bool]) -> Result<f64, PipelineError> {
        Ok(match self {
            FittedDetector::Adf { model, .. } => model.score(values)?,
            FittedDetector::Ae { model, .. } => model.score(values)?,
            FittedDetector::Rc { model } => model.score(values, missing)?,
        })
    }

    /// Score-exceedance verdict for the forest and autoencoder; the two-pass
    /// rule for regression clustering.
    pub fn flagged(&self, values: &[f64], missing: &[bool]) -> Result<bool, PipelineError> {
        Ok(match self {
            FittedDetector::Adf { model, threshold } => model.score(values)? > *threshold,
            FittedDetector::Ae { model, threshold } => model.score(values)? > *threshold,
            FittedDetector::Rc { model } => model.evaluate(values, missing)?.flagged,
        })
    }

    pub fn threshold(&self) -> f64 {
        match self {
            FittedDetector::Adf { threshold, .. } | FittedDetector::Ae { threshold, .. } => {
                *threshold
            }
            FittedDetector::Rc { model } => model.threshold(),
        }
    }
}

pub struct TrainStage {
    pub models: BTreeMap<(Pci, DetectorSpec), FittedDetector>,
}

fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.rotate_left(17) ^ b.rotate_left(41);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn model_seed(cfg: &PipelineConfig, serving: Pci, spec: DetectorSpec) -> u64 {
    let kind = match spec.kind {
        DetectorKind::Rc => 0u64,
        DetectorKind::Adf => 1,
        DetectorKind::Ae => 2,
    };
    let scheme = match spec.scheme {
        FeatureKind::Col => 0u64,
        FeatureKind::Dst => 1,
        FeatureKind::Xy => 2,
    };
    mix_seed(cfg.train.seed, serving.0 as u64, kind * 4 + scheme)
}

fn fit_one(
    cfg: &PipelineConfig,
    spec: DetectorSpec,
    serving: Pci,
    imputed: &ImputedMatrix,
    catalog_pcis: &[Pci],
) -> Result<FittedDetector, PipelineError> {
    let seed = model_seed(cfg, serving, spec);
    Ok(match spec.kind {
        DetectorKind::Adf => FittedDetector::Adf {
            model: AdfModel::fit(&imputed.rows, cfg.adf_params, seed)?,
            threshold: f64::INFINITY,
        },
        DetectorKind::Ae => {
            let (model, report) = AutoencoderModel::fit(&imputed.rows, &cfg.ae_params, seed)?;
            log::info!(
                "ae serving {serving}: reconstruction mse {:.5} -> {:.5}",
                report.initial_mse,
                report.final_mse()
            );
            FittedDetector::Ae {
                model,
                threshold: f64::INFINITY,
            }
        }
        DetectorKind::Rc => FittedDetector::Rc {
            model: RegressionClusteringModel::fit(imputed, catalog_pcis, cfg.rc_params, seed)?,
        },
    })
}

fn model_file(
    spec: DetectorSpec,
    detector: &FittedDetector,
    meta: ModelMeta,
) -> Result<ModelFile, PipelineError> {
    Ok(match (spec.kind, detector) {
        (DetectorKind::Adf, FittedDetector::Adf { model, .. }) => ModelFile::Adf {
            meta,
            model: model.clone(),
        },
        (DetectorKind::Ae, FittedDetector::Ae { model, .. }) => ModelFile::Autoencoder {
            meta,
            model: model.clone(),
        },
        (DetectorKind::Rc, FittedDetector::Rc { model }) => ModelFile::RegressionClustering {
            meta,
            model: model.clone(),
        },
        _ => unreachable!("detector kind matches its fitted variant"),
    })
}

/// Fit one model per (serving cell, detector spec) on the persisted
/// training features. Existing model files are only overwritten with
/// `force`.
pub fn cmd_train(cfg: &PipelineConfig, force: bool) -> Result<TrainStage, PipelineError> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    require(&layout.catalogs(), "catalog directory")?;

    let mut catalogs: BTreeMap<Pci, NeighborCatalog> = BTreeMap::new();
    for entry in ordered_dir(&layout.catalogs())? {
        let text = fs::read_to_string(&entry)?;
        let catalog: NeighborCatalog =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        catalogs.insert(catalog.serving_pci, catalog);
    }
    if catalogs.is_empty() {
        return Err(PipelineError::Dependency(
            "no neighbor catalogs found (run extract first)".into(),
        ));
    }

    let mut models = BTreeMap::new();
    for (&serving, catalog) in &catalogs {
        for &spec in &cfg.detectors {
            let path = layout.model(serving, spec);
            if path.exists() && !force {
                return Err(PipelineError::Dependency(format!(
                    "model {} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
            let feature_path = layout.feature_file("training", serving, spec.scheme);
            require(&feature_path, "training features")?;
            let matrix =
                crate::features::io::read_features_csv(fs::File::open(&feature_path)?)?;
            let imputed = impute(&matrix, cfg.impute);
            let catalog_pcis: Vec<Pci> = catalog.known_neighbors.iter().copied().collect();

            log::info!("training {spec} for serving cell {serving} ({} rows)", matrix.n_rows());
            let detector = fit_one(cfg, spec, serving, &imputed, &catalog_pcis)?;
            let meta = ModelMeta {
                serving_pci: serving,
                scheme: spec.scheme,
                seed: model_seed(cfg, serving, spec),
                catalog_pcis,
                trained_rows: matrix.n_rows(),
                threshold: detector.threshold(),
            };
            write_file(&path, model_file(spec, &detector, meta)?.to_json()?.as_bytes())?;
            models.insert((serving, spec), detector);
        }
    }
    Ok(TrainStage { models })
}

fn ordered_dir(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    entries.sort();
    Ok(entries)
}

fn load_models(
    cfg: &PipelineConfig,
    layout: &Layout,
    catalogs: &BTreeMap<Pci, NeighborCatalog>,
) -> Result<TrainStage, PipelineError> {
    let mut models = BTreeMap::new();
    for &serving in catalogs.keys() {
        for &spec in &cfg.detectors {
            let path = layout.model(serving, spec);
            require(&path, "model file")?;
            let file = ModelFile::load(&path)?;
            let threshold = file.meta().threshold;
            let detector = match file {
                ModelFile::Adf { model, .. } => FittedDetector::Adf { model, threshold },
                ModelFile::Autoencoder { model, .. } => FittedDetector::Ae { model, threshold },
                ModelFile::RegressionClustering { model, .. } => FittedDetector::Rc { model },
            };
            models.insert((serving, spec), detector);
        }
    }
    Ok(TrainStage { models })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub struct RunEval {
    pub false_pci: Pci,
    /// Scored test records per detector spec, pooled over serving cells in
    /// record order.
    pub scored: BTreeMap<DetectorSpec, Vec<ScoredRecord>>,
    /// Benign-labeled validation records and how many of them the static
    /// rule flagged.
    pub validation_benign: usize,
    pub validation_benign_static: usize,
}

pub struct EvalOutputs {
    pub thresholds: BTreeMap<(Pci, DetectorSpec), f64>,
    pub runs: Vec<RunEval>,
    pub recall_rows: Vec<(Pci, DetectorSpec, crate::eval::RecallStats)>,
    pub aggregated: Vec<(DetectorSpec, crate::eval::AggregatedReport)>,
}

struct PreparedRecords {
    records: Vec<ReportRecord>,
    labels: Vec<RecordLabel>,
    imputed: BTreeMap<FeatureKind, ImputedMatrix>,
}

fn prepare(
    reports: &[MeasurementReport],
    false_pci: Pci,
    catalogs: &BTreeMap<Pci, NeighborCatalog>,
    schemes: &[FeatureKind],
    policy: crate::features::ImputePolicy,
) -> BTreeMap<Pci, PreparedRecords> {
    let mut out = BTreeMap::new();
    for (serving, records) in crate::features::preprocess(reports) {
        let Some(catalog) = catalogs.get(&serving) else {
            log::warn!("serving cell {serving} unseen in training; its records are dropped");
            continue;
        };
        let labels = label_records(&records, Some(false_pci), catalog);
        let mut imputed = BTreeMap::new();
        for &scheme in schemes {
            imputed.insert(scheme, impute(&extract_matrix(&records, catalog, scheme), policy));
        }
        out.insert(
            serving,
            PreparedRecords {
                records,
                labels,
                imputed,
            },
        );
    }
    out
}

/// Calibrate per-serving thresholds on pooled benign validation records,
/// score every attack run and write the score, recall and aggregation
/// reports.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvalOutputs, PipelineError> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let sims = read_sim_stage(cfg, &layout)?;

    require(&layout.catalogs(), "catalog directory")?;
    let mut catalogs: BTreeMap<Pci, NeighborCatalog> = BTreeMap::new();
    for entry in ordered_dir(&layout.catalogs())? {
        let text = fs::read_to_string(&entry)?;
        let catalog: NeighborCatalog =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        catalogs.insert(catalog.serving_pci, catalog);
    }
    let mut stage = load_models(cfg, &layout, &catalogs)?;

    let schemes = cfg.schemes();
    let outputs = evaluate(cfg, &sims, &catalogs, &schemes, &mut stage)?;
    write_eval_outputs(&layout, &stage, &outputs)?;
    Ok(outputs)
}

fn evaluate(
    cfg: &PipelineConfig,
    sims: &SimStage,
    catalogs: &BTreeMap<Pci, NeighborCatalog>,
    schemes: &[FeatureKind],
    stage: &mut TrainStage,
) -> Result<EvalOutputs, PipelineError> {
    // Pooled benign validation rows per (serving, scheme): row indices into
    // a fresh matrix assembled across runs, plus static-rule bookkeeping.
    let mut benign_rows: BTreeMap<(Pci, FeatureKind), ImputedMatrix> = BTreeMap::new();
    let mut validation_stats: BTreeMap<Pci, (usize, usize)> = BTreeMap::new();

    for run in &sims.runs {
        let prepared = prepare(&run.validation, run.false_pci, catalogs, schemes, cfg.impute);
        for (serving, p) in prepared {
            for (scheme, imputed) in p.imputed {
                let pool = benign_rows
                    .entry((serving, scheme))
                    .or_insert_with(|| ImputedMatrix {
                        column_names: imputed.column_names.clone(),
                        rows: Vec::new(),
                        missing: Vec::new(),
                    });
                for (i, label) in p.labels.iter().enumerate() {
                    if !label.is_tp {
                        pool.rows.push(imputed.rows[i].clone());
                        pool.missing.push(imputed.missing[i].clone());
                    }
                }
            }
            let stats = validation_stats.entry(run.false_pci).or_insert((0, 0));
            for label in &p.labels {
                if !label.is_tp {
                    stats.0 += 1;
                    if label.is_static {
                        stats.1 += 1;
                    }
                }
            }
        }
    }

    // Calibrate each model at the target benign false positive rate.
    let mut thresholds = BTreeMap::new();
    for ((serving, spec), detector) in stage.models.iter_mut() {
        let threshold = match benign_rows
            .get(&(*serving, spec.scheme))
            .filter(|pool| !pool.rows.is_empty())
        {
            None => {
                log::warn!("no benign validation rows for serving cell {serving}; threshold stays infinite");
                f64::INFINITY
            }
            Some(pool) => match detector {
                FittedDetector::Rc { model } => model.calibrate(pool, cfg.target_fpr),
                FittedDetector::Adf { model, threshold } => {
                    let scores: Result<Vec<f64>, _> =
                        pool.rows.iter().map(|r| model.score(r)).collect();
                    *threshold = calibrate_threshold(&scores?, cfg.target_fpr)?;
                    *threshold
                }
                FittedDetector::Ae { model, threshold } => {
                    let scores: Result<Vec<f64>, _> =
                        pool.rows.iter().map(|r| model.score(r)).collect();
                    *threshold = calibrate_threshold(&scores?, cfg.target_fpr)?;
                    *threshold
                }
            },
        };
        thresholds.insert((*serving, *spec), threshold);
    }

    // Score the attack runs.
    let mut runs = Vec::new();
    let mut pooled_recall: BTreeMap<(Pci, DetectorSpec), (Vec<f64>, Vec<RecordLabel>)> =
        BTreeMap::new();

    for run in &sims.runs {
        let prepared = prepare(&run.test, run.false_pci, catalogs, schemes, cfg.impute);
        let mut scored: BTreeMap<DetectorSpec, Vec<ScoredRecord>> = BTreeMap::new();

        for (serving, p) in &prepared {
            for &spec in &cfg.detectors {
                let detector = stage
                    .models
                    .get(&(*serving, spec))
                    .expect("trained for every catalog cell");
                let imputed = &p.imputed[&spec.scheme];
                let out = scored.entry(spec).or_default();
                let pool = pooled_recall.entry((*serving, spec)).or_default();

                for (i, record) in p.records.iter().enumerate() {
                    let score = detector.score(&imputed.rows[i], &imputed.missing[i])?;
                    let flagged = detector.flagged(&imputed.rows[i], &imputed.missing[i])?;
                    let label = p.labels[i];
                    out.push(ScoredRecord {
                        record_id: record.record_id,
                        time_s: record.time_s,
                        serving_pci: *serving,
                        score,
                        flagged,
                        is_static: label.is_static,
                        is_tp: label.is_tp,
                    });
                    // Recall accounting is threshold-based for score
                    // detectors and verdict-based for regression clustering.
                    match spec.kind {
                        DetectorKind::Rc => pool.0.push(if flagged { 1.0 } else { 0.0 }),
                        _ => pool.0.push(score),
                    }
                    pool.1.push(label);
                }
            }
        }
        for records in scored.values_mut() {
            records.sort_by_key(|r| r.record_id);
        }

        let (validation_benign, validation_benign_static) =
            validation_stats.get(&run.false_pci).copied().unwrap_or((0, 0));
        runs.push(RunEval {
            false_pci: run.false_pci,
            scored,
            validation_benign,
            validation_benign_static,
        });
    }

    // Per-serving recall pooled across runs.
    let mut recall_rows = Vec::new();
    for ((serving, spec), (scores, labels)) in &pooled_recall {
        let threshold = thresholds[&(*serving, *spec)];
        let mut stats = match spec.kind {
            DetectorKind::Rc => recall_report(scores, 0.5, labels)?,
            _ => recall_report(scores, threshold, labels)?,
        };
        stats.threshold = threshold;
        recall_rows.push((*serving, *spec, stats));
    }

    // Per-false-cell aggregation.
    let mut aggregated = Vec::new();
    for run in &runs {
        for (&spec, records) in &run.scored {
            aggregated.push((
                spec,
                aggregate_false_cell(records, run.false_pci, cfg.position_bin_s),
            ));
        }
    }

    Ok(EvalOutputs {
        thresholds,
        runs,
        recall_rows,
        aggregated,
    })
}

fn write_eval_outputs(
    layout: &Layout,
    stage: &TrainStage,
    outputs: &EvalOutputs,
) -> Result<(), PipelineError> {
    for run in &outputs.runs {
        for (&spec, records) in &run.scored {
            let mut buf = Vec::new();
            crate::eval::io::write_scores_csv(&mut buf, spec.kind, records)?;
            write_file(&layout.scores(spec, run.false_pci), &buf)?;
        }
    }

    let recall_rows: Vec<RecallRow> = outputs
        .recall_rows
        .iter()
        .map(|(serving, spec, stats)| RecallRow {
            serving_pci: *serving,
            detector: spec.kind,
            scheme: spec.scheme,
            stats: *stats,
        })
        .collect();
    let mut buf = Vec::new();
    crate::eval::io::write_recall_csv(&mut buf, &recall_rows)?;
    write_file(&layout.recall(), &buf)?;

    let aggregated_rows: Vec<AggregatedRow> = outputs
        .aggregated
        .iter()
        .map(|(spec, report)| AggregatedRow {
            detector: spec.kind,
            scheme: spec.scheme,
            report: *report,
        })
        .collect();
    let mut buf = Vec::new();
    crate::eval::io::write_aggregated_csv(&mut buf, &aggregated_rows)?;
    write_file(&layout.aggregated(), &buf)?;

    // Refresh persisted model thresholds now that calibration ran.
    for ((serving, spec), threshold) in &outputs.thresholds {
        let path = layout.model(*serving, *spec);
        let mut file = ModelFile::load(&path)?;
        file.meta_mut().threshold = *threshold;
        if let (ModelFile::RegressionClustering { model, .. }, Some(FittedDetector::Rc { model: fitted })) =
            (&mut file, stage.models.get(&(*serving, *spec)))
        {
            model.set_threshold(fitted.threshold());
        }
        file.save(&path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report + pipeline
// ---------------------------------------------------------------------------

/// Regenerate plot-ready timelines from persisted score files and return a
/// human-readable summary.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<String, PipelineError> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    require(&layout.recall(), "recall report")?;

    let mut summary = String::new();
    summary.push_str(&format!(
        "recall report: {}\naggregated report: {}\n",
        layout.recall().display(),
        layout.aggregated().display()
    ));

    for &pci in &cfg.scenario_pcis {
        let false_pci = Pci(pci);
        for &spec in &cfg.detectors {
            let path = layout.scores(spec, false_pci);
            require(&path, "score file")?;
            let records = read_scores_csv(&path)?;
            let rows = export_timeline(&records);
            let mut buf = Vec::new();
            crate::eval::io::write_timeline_csv(&mut buf, &rows)?;
            write_file(&layout.timeline(spec, false_pci), &buf)?;

            let tp = records.iter().filter(|r| r.is_tp).count();
            let detected = records.iter().filter(|r| r.is_tp && r.detected()).count();
            summary.push_str(&format!(
                "false cell {false_pci} {spec}: {detected}/{tp} polluted records detected\n"
            ));
        }
    }
    Ok(summary)
}

fn read_scores_csv(path: &Path) -> Result<Vec<ScoredRecord>, PipelineError> {
    let mut rdr = csv::Reader::from_reader(fs::File::open(path)?);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| PipelineError::Numerical(e.to_string()))?;
        let parse_err = |e: String| PipelineError::Numerical(e);
        out.push(ScoredRecord {
            record_id: record[0].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            time_s: record[1].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
            serving_pci: Pci(record[2].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?),
            score: record[4].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
            flagged: record[5].parse().map_err(|e: std::str::ParseBoolError| parse_err(e.to_string()))?,
            is_static: record[6].parse().map_err(|e: std::str::ParseBoolError| parse_err(e.to_string()))?,
            is_tp: record[7].parse().map_err(|e: std::str::ParseBoolError| parse_err(e.to_string()))?,
        });
    }
    Ok(out)
}

pub struct PipelineOutputs {
    pub sims: SimStage,
    pub eval: EvalOutputs,
    pub elapsed: std::time::Duration,
}

/// Run every stage in dependency order. Artifacts land under
/// `cfg.out_dir` and are byte-identical across reruns with the same config.
pub fn cmd_pipeline(cfg: &PipelineConfig, force: bool) -> Result<PipelineOutputs, PipelineError> {
    let started = std::time::Instant::now();
    let sims = cmd_simulate(cfg)?;
    cmd_extract(cfg)?;
    cmd_train(cfg, force)?;
    let eval = cmd_evaluate(cfg)?;
    Ok(PipelineOutputs {
        sims,
        eval,
        elapsed: started.elapsed(),
    })
}
