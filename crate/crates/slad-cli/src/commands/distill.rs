use std::path::Path;

use serde_json::json;
use slad_core::checkpoint::{self, Checkpoint};
use slad_core::distill::{distill, sample_student};
use slad_core::metrics::{energy_distance, mode_coverage};
use slad_core::plot::{self, Series};
use slad_core::report;
use slad_core::solver::NeuralDenoiser;
use slad_core::{rng, Result};

use crate::rundir::{fmt, lineage, LogSink, RunContext};

pub fn run(ctx: &RunContext, teacher_path: &Path, resume: Option<&Path>) -> Result<()> {
    let sched = ctx.schedule()?;
    let dataset = ctx.dataset()?;
    let net_cfg = ctx.cfg.net_config();
    let seed = ctx.seed();

    let teacher_ckpt = checkpoint::load(teacher_path)?;
    ctx.check_compatible(&teacher_ckpt.meta, "teacher checkpoint")?;
    let teacher = NeuralDenoiser {
        params: teacher_ckpt.theta,
        cfg: net_cfg.clone(),
        t_max: sched.t_max(),
    };

    // student starts from the teacher weights unless resuming
    let init = match resume {
        Some(path) => {
            let ckpt = checkpoint::load_for_resume(path, &ctx.cfg.hash())?;
            ctx.check_compatible(&ckpt.meta, "resume")?;
            ckpt.theta
        }
        None => teacher.params.clone(),
    };

    let mut log = LogSink::create(
        &ctx.out.join("distill_log.csv"),
        &["step", "loss", "grad_norm", "ed_1step", "ed_4step"],
    )?;
    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    let out = distill(&teacher, init, &dataset, &ctx.cfg.distill, &net_cfg, &sched, seed, |p| {
        log.row(&[
            p.step.to_string(),
            fmt(p.loss),
            fmt(p.grad_norm),
            fmt(p.ed_one_step),
            fmt(p.ed_four_step),
        ]);
        last = (p.loss, p.ed_one_step, p.ed_four_step);
    })?;
    log.finish()?;

    let ckpt = Checkpoint {
        meta: ctx.meta(ctx.cfg.distill.iterations, &lineage(seed)),
        theta: out.theta,
        theta_minus: out.theta_minus.clone(),
    };
    checkpoint::save(&ctx.out.join("student.slad"), &ckpt)?;

    // final evaluation on the bigger eval budget
    let n_eval = ctx.cfg.eval.n_samples;
    let eval_seed = rng::derive(seed, rng::tags::EVAL);
    let reference = dataset.batch(eval_seed, 0, n_eval);
    let s1 = sample_student(&out.theta_minus, &net_cfg, &sched, n_eval, 1, eval_seed);
    let s4 = sample_student(
        &out.theta_minus,
        &net_cfg,
        &sched,
        n_eval,
        4,
        rng::derive(eval_seed, 4),
    );
    let (ed1, ed4) = (energy_distance(&s1, &reference.points), energy_distance(&s4, &reference.points));
    let mut metrics = json!({
        "final_loss": last.0,
        "ed_1step": ed1,
        "ed_4step": ed4,
        "samples": n_eval,
    });
    if !dataset.mode_centers().is_empty() {
        let (covered, hist) =
            mode_coverage(&s4, dataset.mode_centers(), ctx.cfg.eval.coverage_threshold);
        metrics["mode_coverage_4step"] = json!(covered);
        metrics["mode_histogram_4step"] = json!(hist);
    }
    report::write_json(&ctx.out.join("metrics.json"), &metrics)?;

    plot::scatter(
        &ctx.out.join("student_samples.svg"),
        "data vs distilled samples",
        &[
            Series::from_rows("data", &reference.points),
            Series::from_rows("student 1-step", &s1),
            Series::from_rows("student 4-step", &s4),
        ],
    )?;
    println!(
        "distill: {} steps, final loss {:.6}, energy distance 1-step {ed1:.6} / 4-step {ed4:.6}",
        ctx.cfg.distill.iterations, last.0
    );
    Ok(())
}
