use std::path::Path;

use serde_json::json;
use slad_core::error::Error;
use slad_core::metrics::{energy_distance, mode_coverage};
use slad_core::net::f_generate;
use slad_core::plot::{self, Series};
use slad_core::report::{self, CsvFile};
use slad_core::solver::multistep_sample;
use slad_core::tensor::Tensor;
use slad_core::{checkpoint, rng, Result};

use crate::rundir::{fmt, RunContext};

pub fn run(
    ctx: &RunContext,
    ckpt_path: &Path,
    steps: usize,
    count: usize,
    label: Option<usize>,
) -> Result<()> {
    if ![1, 2, 4, 8].contains(&steps) {
        return Err(Error::InvalidParameter(format!(
            "sample: steps must be one of 1, 2, 4, 8; got {steps}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("sample: count must be >= 1".into()));
    }
    let sched = ctx.schedule()?;
    let dataset = ctx.dataset()?;
    let net_cfg = ctx.cfg.net_config();
    let ckpt = checkpoint::load(ckpt_path)?;
    ctx.check_compatible(&ckpt.meta, "sample checkpoint")?;

    let labels: Vec<Option<usize>> = match label {
        Some(l) => {
            if l >= net_cfg.n_classes {
                return Err(Error::InvalidParameter(format!(
                    "sample: label {l} out of range for {} classes",
                    net_cfg.n_classes
                )));
            }
            vec![Some(l); count]
        }
        None => (0..count).map(|i| Some(i % net_cfg.n_classes)).collect(),
    };

    // sampling weights default to the EMA shadow
    let params = &ckpt.theta_minus;
    let f = |x: &Tensor, l: &[Option<usize>], g: f64, t: usize| {
        f_generate(params, &net_cfg, x, l, g, t, 1, &sched)
    };
    let mut r = rng::stream(ctx.seed(), rng::tags::SAMPLE);
    let samples = multistep_sample(&f, steps, &labels, net_cfg.data_dim, &sched, &mut r);

    let header: Vec<String> = (0..net_cfg.data_dim)
        .map(|j| format!("x{j}"))
        .chain(["label".to_string()])
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvFile::create(&ctx.out.join("samples.csv"), &header_refs)?;
    for i in 0..count {
        let mut row: Vec<String> = samples.row(i).iter().map(|&v| fmt(v)).collect();
        row.push(labels[i].unwrap().to_string());
        csv.row(&row)?;
    }
    csv.finish()?;

    let reference = dataset.batch(rng::derive(ctx.seed(), rng::tags::EVAL), 0, count.max(64));
    let ed = energy_distance(&samples, &reference.points);
    let mut metrics = json!({ "steps": steps, "count": count, "energy_distance": ed });
    if !dataset.mode_centers().is_empty() {
        let (covered, hist) =
            mode_coverage(&samples, dataset.mode_centers(), ctx.cfg.eval.coverage_threshold);
        metrics["mode_coverage"] = json!(covered);
        metrics["mode_histogram"] = json!(hist);
    }
    report::write_json(&ctx.out.join("metrics.json"), &metrics)?;

    plot::scatter(
        &ctx.out.join("samples.svg"),
        &format!("data vs {steps}-step samples"),
        &[
            Series::from_rows("data", &reference.points),
            Series::from_rows("samples", &samples),
        ],
    )?;
    println!("sample: {count} points at {steps} steps, energy distance {ed:.6}");
    Ok(())
}
