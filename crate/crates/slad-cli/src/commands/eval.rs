use std::path::Path;

use serde_json::json;
use slad_core::distill::sample_student;
use slad_core::metrics::{delta_error, energy_distance, mode_coverage};
use slad_core::net::f_generate;
use slad_core::plot::{self, Series};
use slad_core::report::{self, CsvFile};
use slad_core::tensor::Tensor;
use slad_core::{checkpoint, rng, Result};

use crate::rundir::{fmt, RunContext};

pub fn run(ctx: &RunContext, ckpt_path: &Path) -> Result<()> {
    let sched = ctx.schedule()?;
    let dataset = ctx.dataset()?;
    let net_cfg = ctx.cfg.net_config();
    let ckpt = checkpoint::load(ckpt_path)?;
    ctx.check_compatible(&ckpt.meta, "eval checkpoint")?;
    let params = &ckpt.theta_minus;
    let eval_cfg = &ctx.cfg.eval;
    let eval_seed = rng::derive(ctx.seed(), rng::tags::EVAL);

    let reference = dataset.batch(eval_seed, 0, eval_cfg.n_samples);
    let mut steps_csv = CsvFile::create(
        &ctx.out.join("steps.csv"),
        &["steps", "energy_distance", "mode_coverage"],
    )?;
    let mut per_step = Vec::new();
    let mut last_samples: Option<(usize, Tensor)> = None;
    for &steps in &eval_cfg.sample_steps {
        let samples = sample_student(
            params,
            &net_cfg,
            &sched,
            eval_cfg.n_samples,
            steps,
            rng::derive(eval_seed, steps as u64),
        );
        let ed = energy_distance(&samples, &reference.points);
        let coverage = if dataset.mode_centers().is_empty() {
            0
        } else {
            mode_coverage(&samples, dataset.mode_centers(), eval_cfg.coverage_threshold).0
        };
        steps_csv.row(&[steps.to_string(), fmt(ed), coverage.to_string()])?;
        per_step.push(json!({ "steps": steps, "energy_distance": ed, "mode_coverage": coverage }));
        last_samples = Some((steps, samples));
    }
    steps_csv.finish()?;

    // adjacent-point consistency-mapping error over the solver grid
    let f = |x: &Tensor, l: &[Option<usize>], g: f64, t: usize| {
        f_generate(params, &net_cfg, x, l, g, t, 1, &sched)
    };
    let delta = delta_error(
        &f,
        &dataset,
        eval_cfg.delta_k,
        &sched,
        eval_cfg.delta_samples,
        eval_cfg.delta_t_min,
        eval_cfg.delta_noise,
        eval_seed,
    );
    let mut delta_csv = CsvFile::create(&ctx.out.join("delta.csv"), &["t", "delta"])?;
    for &(t, d) in &delta {
        delta_csv.row(&[t.to_string(), fmt(d)])?;
    }
    delta_csv.finish()?;
    plot::lines(
        &ctx.out.join("delta.svg"),
        "adjacent-point mapping error",
        &[Series {
            name: "delta(t)",
            points: delta.iter().map(|&(t, d)| (t as f64, d)).collect(),
        }],
    )?;

    let mean_delta = delta.iter().map(|&(_, d)| d).sum::<f64>() / delta.len().max(1) as f64;
    report::write_json(
        &ctx.out.join("metrics.json"),
        &json!({ "per_step": per_step, "mean_delta": mean_delta, "delta_k": eval_cfg.delta_k }),
    )?;

    if let Some((steps, samples)) = last_samples {
        plot::scatter(
            &ctx.out.join("eval_samples.svg"),
            &format!("data vs {steps}-step samples"),
            &[
                Series::from_rows("data", &reference.points),
                Series::from_rows("samples", &samples),
            ],
        )?;
    }
    println!("eval: {} step counts, mean delta {mean_delta:.6}", eval_cfg.sample_steps.len());
    Ok(())
}
