use fbs_core::pipeline::{cmd_pipeline, PipelineConfig};
use fbs_core::Pci;

fn main() {
    let toml = r#"
out_dir = "/tmp/fbs_fpdbg"
detectors = ["adf:col"]

[impute]
policy = "fill_value"
value = -100.0

[sim]
neighbor_detect_threshold_dbm = -90.0

[train]
n_ues = 60
duration_s = 300.0
seed = 1

[test]
n_ues = 60
seed = 9
dwell_s = 100.0
travel_s = 60.0

[validation]
seed = 5
"#;
    let cfg = PipelineConfig::from_toml_str(toml).unwrap();
    let _ = std::fs::remove_dir_all(&cfg.out_dir);
    let out = cmd_pipeline(&cfg, false).expect("pipeline");

    // Flagged benign travel-phase records of serving cell 7, any run.
    let spec = cfg.detectors[0];
    let mut shown = 0;
    for run in &out.eval.runs {
        for r in &run.scored[&spec] {
            if !r.is_tp && r.flagged && r.time_s >= 100.0 && r.serving_pci == Pci(7) && shown < 15 {
                println!(
                    "run pci {} t {} serving 7 score {:.2} static {}",
                    run.false_pci, r.time_s, r.score, r.is_static
                );
                shown += 1;
            }
        }
    }
    // Distribution of flagged-record times for serving 7 pooled.
    let mut dwell = 0;
    let mut travel = 0;
    for run in &out.eval.runs {
        for r in &run.scored[&spec] {
            if !r.is_tp && r.flagged && r.serving_pci == Pci(7) {
                if r.time_s < 100.0 { dwell += 1 } else { travel += 1 }
            }
        }
    }
    println!("serving 7 flagged benign: dwell {dwell} travel {travel}");
}
