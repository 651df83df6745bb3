use shadowlab::report::*;
use std::time::Instant;
fn main() {
    let dir = std::path::PathBuf::from("/tmp/calib");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("disk.json"), r#"{"kind":"disk"}"#).unwrap();
    std::fs::write(dir.join("ns.json"), r#"{"kind":"north_south"}"#).unwrap();
    let which = std::env::args().nth(1).unwrap_or_default();
    if which == "prop1" || which.is_empty() {
        let t = Instant::now();
        let cfg = ExperimentConfig {
            version: 1, pipeline: PipelineKind::Prop1,
            flow: Some(dir.join("disk.json")), flow1: None, flow2: None,
            d_list: vec![0.01], eps0: 0.25, eps_rep: None,
            trials: 6, seed: 11, out_csv: dir.join("p1.csv"), out_summary: dir.join("p1.json"), out_certs: None,
        };
        let out = run_experiment(&cfg).unwrap();
        println!("prop1: {}/{} pass in {:?}", out.summary.standard_pass, out.rows.len(), t.elapsed());
        for r in &out.rows { if !r.standard_ok { println!("  FAIL seed {} sup {}", r.seed, r.sup_error); } }
    }
    if which == "thm1" || which.is_empty() {
        let t = Instant::now();
        let cfg = ExperimentConfig {
            version: 1, pipeline: PipelineKind::Thm1,
            flow: Some(dir.join("disk.json")), flow1: None, flow2: None,
            d_list: vec![0.02, 0.005], eps0: 0.3, eps_rep: None,
            trials: 6, seed: 5, out_csv: dir.join("t1.csv"), out_summary: dir.join("t1.json"), out_certs: None,
        };
        let out = run_experiment(&cfg).unwrap();
        println!("thm1: std {}/{} counterex {} cases {:?} retries {:?} in {:?}",
            out.summary.standard_pass, out.rows.len(), out.summary.counterexamples,
            out.summary.case_histogram, out.summary.retry_histogram, t.elapsed());
    }
    if which == "thm2" || which.is_empty() {
        let t = Instant::now();
        let cfg = ExperimentConfig {
            version: 1, pipeline: PipelineKind::Thm2,
            flow: None, flow1: Some(dir.join("disk.json")), flow2: Some(dir.join("ns.json")),
            d_list: vec![0.01], eps0: 0.3, eps_rep: None,
            trials: 6, seed: 3, out_csv: dir.join("t2.csv"), out_summary: dir.join("t2.json"), out_certs: None,
        };
        let out = run_experiment(&cfg).unwrap();
        println!("thm2: std {}/{} cases {:?} in {:?}", out.summary.standard_pass, out.rows.len(), out.summary.case_histogram, t.elapsed());
    }
}
