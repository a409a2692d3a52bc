use std::path::Path;

use serde_json::json;
use slad_core::checkpoint::{self, Checkpoint};
use slad_core::metrics::{energy_distance, mode_coverage};
use slad_core::plot::{self, Series};
use slad_core::report;
use slad_core::solver::{sample_diffusion, NeuralDenoiser};
use slad_core::teacher::train_teacher;
use slad_core::{rng, Result};

use crate::rundir::{fmt, lineage, LogSink, RunContext};

pub fn run(ctx: &RunContext, resume: Option<&Path>) -> Result<()> {
    let sched = ctx.schedule()?;
    let dataset = ctx.dataset()?;
    let net_cfg = ctx.cfg.net_config();
    let seed = ctx.seed();

    let init = match resume {
        Some(path) => {
            let ckpt = checkpoint::load_for_resume(path, &ctx.cfg.hash())?;
            ctx.check_compatible(&ckpt.meta, "resume")?;
            Some(ckpt.theta)
        }
        None => None,
    };

    let mut log = LogSink::create(&ctx.out.join("teacher_log.csv"), &["step", "loss", "grad_norm"])?;
    let mut final_loss = f64::NAN;
    let params = train_teacher(&dataset, &net_cfg, &ctx.cfg.teacher, &sched, seed, init, |p| {
        log.row(&[p.step.to_string(), fmt(p.loss), fmt(p.grad_norm)]);
        final_loss = p.loss;
        if p.step % ctx.cfg.teacher.checkpoint_every == 0 && p.step < ctx.cfg.teacher.iterations {
            let ckpt = Checkpoint {
                meta: ctx.meta(p.step, &lineage(seed)),
                theta: p.params.clone(),
                theta_minus: p.params.clone(),
            };
            log.capture(checkpoint::save(
                &ctx.out.join(format!("teacher_step{}.slad", p.step)),
                &ckpt,
            ));
        }
    })?;
    log.finish()?;

    let ckpt = Checkpoint {
        meta: ctx.meta(ctx.cfg.teacher.iterations, &lineage(seed)),
        theta: params.clone(),
        theta_minus: params.clone(),
    };
    checkpoint::save(&ctx.out.join("teacher.slad"), &ckpt)?;

    // quick fidelity check: 50-step guided descent vs the data
    let model = NeuralDenoiser { params, cfg: net_cfg.clone(), t_max: sched.t_max() };
    let n_eval = ctx.cfg.eval.n_samples.min(2000);
    let samples = sample_diffusion(
        &model,
        net_cfg.n_classes,
        net_cfg.data_dim,
        n_eval,
        50,
        1.0,
        &sched,
        rng::derive(seed, rng::tags::EVAL),
    );
    let reference = dataset.batch(rng::derive(seed, rng::tags::EVAL), 0, n_eval);
    let ed = energy_distance(&samples, &reference.points);
    let mut metrics = json!({
        "final_loss": final_loss,
        "ddim50_energy_distance": ed,
        "samples": n_eval,
    });
    if !dataset.mode_centers().is_empty() {
        let (covered, hist) =
            mode_coverage(&samples, dataset.mode_centers(), ctx.cfg.eval.coverage_threshold);
        metrics["mode_coverage"] = json!(covered);
        metrics["mode_histogram"] = json!(hist);
    }
    report::write_json(&ctx.out.join("metrics.json"), &metrics)?;

    plot::scatter(
        &ctx.out.join("teacher_samples.svg"),
        "data vs 50-step teacher samples",
        &[
            Series::from_rows("data", &reference.points),
            Series::from_rows("teacher ddim-50", &samples),
        ],
    )?;
    println!(
        "train-teacher: {} steps, final loss {final_loss:.6}, ddim-50 energy distance {ed:.6}",
        ctx.cfg.teacher.iterations
    );
    Ok(())
}
