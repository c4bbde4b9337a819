use std::collections::BTreeMap;

use fbs_core::pipeline::{cmd_pipeline, DetectorSpec, PipelineConfig};
use fbs_core::Pci;

fn main() {
    env_logger::Builder::from_default_env().init();
    let args: Vec<String> = std::env::args().collect();
    let threshold: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(-95.0);
    let hyst: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let redirect: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20.0);
    let warmup: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(120.0);
    let shadow: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let detectors: String = args
        .get(4)
        .cloned()
        .unwrap_or_else(|| "\"adf:col\"".to_string());

    let fill = threshold - 10.0;
    let toml = format!(
        r#"
out_dir = "/tmp/fbs_tune"
detectors = [{detectors}]

[impute]
policy = "fill_value"
value = {fill}

[sim]
neighbor_detect_threshold_dbm = {threshold}
handover_hysteresis_db = {hyst}
redirect_interval_s = {redirect}
warmup_s = {warmup}
shadowing_sigma_db = {shadow}

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
n_ues = 180

[rc_params]
k = 4
min_records = 50

[rc_params.forest]
n_trees = 25
max_depth = 12
min_leaf = 2
"#
    );
    let cfg = PipelineConfig::from_toml_str(&toml).unwrap();
    let _ = std::fs::remove_dir_all(&cfg.out_dir);
    let started = std::time::Instant::now();
    let out = cmd_pipeline(&cfg, false).expect("pipeline");
    println!("=== threshold {threshold} dBm, elapsed {:?}", started.elapsed());

    // Validation static rates (criterion 3b).
    let mut val_static = 0usize;
    let mut val_benign = 0usize;
    for run in &out.eval.runs {
        val_static += run.validation_benign_static;
        val_benign += run.validation_benign;
    }
    println!("validation benign {val_benign}, static flagged {val_static}");

    // Catalog sizes via model metas is awkward here; recompute quickly.
    // Per-serving FPR pooled across runs + per-scenario aggregated ratio.
    let specs: Vec<DetectorSpec> = cfg.detectors.clone();
    for spec in &specs {
        let mut fp: BTreeMap<Pci, (usize, usize)> = BTreeMap::new();
        let mut ratios = Vec::new();
        let mut order_ok = 0usize;
        for run in &out.eval.runs {
            let records = &run.scored[spec];
            for r in records {
                if !r.is_tp {
                    let e = fp.entry(r.serving_pci).or_default();
                    e.1 += 1;
                    if r.flagged {
                        e.0 += 1;
                    }
                }
            }
            let tp_scores: Vec<f64> = records.iter().filter(|r| r.is_tp).map(|r| r.score).collect();
            let benign_scores: Vec<f64> =
                records.iter().filter(|r| !r.is_tp).map(|r| r.score).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            if mean(&tp_scores) > mean(&benign_scores) {
                order_ok += 1;
            }
        }
        for (spec2, agg) in &out.eval.aggregated {
            if spec2 == spec {
                let p = agg.total_positions();
                let d = agg.total_detected();
                ratios.push(d as f64 / p.max(1) as f64);
                println!(
                    "  {spec} agg pci {}: P {p} D {d} ({:.1}%)  [v1 {}/{} v2 {}/{} v>2 {}/{}]",
                    agg.false_pci,
                    100.0 * d as f64 / p.max(1) as f64,
                    agg.visible_1.detected, agg.visible_1.positions,
                    agg.visible_2.detected, agg.visible_2.positions,
                    agg.visible_many.detected, agg.visible_many.positions,
                );
            }
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        println!("  {spec}: avg aggregated detection {:.1}%", avg * 100.0);
        println!("  {spec}: score ordering ok on {order_ok}/{} scenarios", out.eval.runs.len());
        let mut worst_lo = f64::INFINITY;
        let mut worst_hi: f64 = 0.0;
        let mut phase: BTreeMap<Pci, [usize; 4]> = BTreeMap::new();
        for run in &out.eval.runs {
            for r in &run.scored[spec] {
                if !r.is_tp {
                    let e = phase.entry(r.serving_pci).or_default();
                    let dwell = r.time_s < 100.0;
                    if dwell { e[1] += 1; if r.flagged { e[0] += 1; } }
                    else { e[3] += 1; if r.flagged { e[2] += 1; } }
                }
            }
        }
        for (serving, (fps, n)) in &fp {
            let rate = *fps as f64 / (*n).max(1) as f64;
            worst_lo = worst_lo.min(rate);
            worst_hi = worst_hi.max(rate);
            let ph = phase[serving];
            println!(
                "    serving {serving}: fpr {:.3}% ({fps}/{n})  dwell {:.3}% ({}/{}) travel {:.3}% ({}/{})",
                rate * 100.0,
                100.0 * ph[0] as f64 / ph[1].max(1) as f64, ph[0], ph[1],
                100.0 * ph[2] as f64 / ph[3].max(1) as f64, ph[2], ph[3],
            );
        }
        println!("  {spec}: fpr range [{:.3}%, {:.3}%]", worst_lo * 100.0, worst_hi * 100.0);
    }
}
