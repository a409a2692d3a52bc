use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use slad_core::checkpoint::{self, Checkpoint};
use slad_core::config::RunConfig;
use slad_core::distill::{distill, sample_student, DistillConfig, DistillMode};
use slad_core::error::Error;
use slad_core::metrics::{energy_distance, mode_coverage};
use slad_core::plot::{self, Series};
use slad_core::report::{self, CsvFile};
use slad_core::solver::NeuralDenoiser;
use slad_core::subpath::sigma_error_closed;
use slad_core::{parallel, rng, Result};

use crate::rundir::{fmt, lineage, LogSink, RunContext};

pub fn required(path: Option<PathBuf>) -> Result<PathBuf> {
    path.ok_or_else(|| {
        Error::Config("this sweep needs --checkpoint with a teacher checkpoint".into())
    })
}

/// Largest solver stride that divides k and does not exceed the configured
/// one; keeps estimation well formed for step sizes the base stride does
/// not divide.
fn fit_stride(k: usize, k_phi: usize) -> usize {
    (1..=k_phi.min(k)).rev().find(|d| k % d == 0).unwrap_or(1)
}

struct GridPoint {
    name: String,
    mutate: Box<dyn Fn(&mut DistillConfig) + Sync + Send>,
}

struct GridOutcome {
    name: String,
    ed_1step: f64,
    ed_4step: f64,
    coverage: usize,
}

/// Runs one distillation per grid point (in parallel worker threads, one
/// run directory each) and evaluates few-step sampling.
fn sweep(ctx: &RunContext, teacher_path: &Path, points: Vec<GridPoint>) -> Result<Vec<GridOutcome>> {
    let sched = ctx.schedule()?;
    let dataset = ctx.dataset()?;
    let net_cfg = ctx.cfg.net_config();
    let teacher_ckpt = checkpoint::load(teacher_path)?;
    ctx.check_compatible(&teacher_ckpt.meta, "teacher checkpoint")?;
    let teacher = NeuralDenoiser {
        params: teacher_ckpt.theta,
        cfg: net_cfg.clone(),
        t_max: sched.t_max(),
    };
    let seed = ctx.seed();
    let eval_seed = rng::derive(seed, rng::tags::EVAL);
    let n_eval = ctx.cfg.eval.n_samples;
    let reference = dataset.batch(eval_seed, 0, n_eval);

    let results: Vec<Result<GridOutcome>> = parallel::map_indexed(points.len(), |i| {
        let point = &points[i];
        let subdir = ctx.out.join(&point.name);
        fs::create_dir_all(&subdir)?;
        let mut cfg: RunConfig = ctx.cfg.clone();
        (point.mutate)(&mut cfg.distill);
        cfg.validate()?;
        fs::write(subdir.join("config.json"), cfg.resolved_json() + "\n")?;

        let mut log = LogSink::create(
            &subdir.join("distill_log.csv"),
            &["step", "loss", "grad_norm", "ed_1step", "ed_4step"],
        )?;
        let out = distill(
            &teacher,
            teacher.params.clone(),
            &dataset,
            &cfg.distill,
            &net_cfg,
            &sched,
            seed,
            |p| {
                log.row(&[
                    p.step.to_string(),
                    fmt(p.loss),
                    fmt(p.grad_norm),
                    fmt(p.ed_one_step),
                    fmt(p.ed_four_step),
                ]);
            },
        )?;
        log.finish()?;
        let ckpt = Checkpoint {
            meta: {
                let mut m = ctx.meta(cfg.distill.iterations, &lineage(seed));
                m.config_hash = cfg.hash();
                m
            },
            theta: out.theta,
            theta_minus: out.theta_minus.clone(),
        };
        checkpoint::save(&subdir.join("student.slad"), &ckpt)?;

        let s1 = sample_student(&out.theta_minus, &net_cfg, &sched, n_eval, 1, eval_seed);
        let s4 =
            sample_student(&out.theta_minus, &net_cfg, &sched, n_eval, 4, rng::derive(eval_seed, 4));
        let coverage = if dataset.mode_centers().is_empty() {
            0
        } else {
            mode_coverage(&s4, dataset.mode_centers(), ctx.cfg.eval.coverage_threshold).0
        };
        Ok(GridOutcome {
            name: point.name.clone(),
            ed_1step: energy_distance(&s1, &reference.points),
            ed_4step: energy_distance(&s4, &reference.points),
            coverage,
        })
    });
    results.into_iter().collect()
}

pub fn step_size(ctx: &RunContext, teacher: PathBuf) -> Result<()> {
    let base_k_phi = ctx.cfg.distill.k_phi;
    let t_max = ctx.cfg.schedule.t_max;
    let mut points = Vec::new();
    let mut grid = Vec::new();
    for &k in &ctx.cfg.ablate.step_sizes {
        if k == 0 || k >= t_max {
            return Err(Error::Config(format!(
                "ablate step-size: k={k} outside 1..{t_max}"
            )));
        }
        for me in [true, false] {
            let stride = fit_stride(k, base_k_phi);
            grid.push((k, me));
            points.push(GridPoint {
                name: format!("k{k}_me{}", me as u8),
                mutate: Box::new(move |d: &mut DistillConfig| {
                    d.k = k;
                    d.k_phi = stride;
                    d.multiple_estimation = me;
                }),
            });
        }
    }
    let outcomes = sweep(ctx, &teacher, points)?;

    let mut csv = CsvFile::create(&ctx.out.join("step_size.csv"), &["k", "me", "energy_distance"])?;
    let mut with_me = Vec::new();
    let mut without_me = Vec::new();
    for ((k, me), o) in grid.iter().zip(&outcomes) {
        csv.row(&[k.to_string(), (*me as u8).to_string(), fmt(o.ed_4step)])?;
        if *me {
            with_me.push((*k as f64, o.ed_4step));
        } else {
            without_me.push((*k as f64, o.ed_4step));
        }
    }
    csv.finish()?;
    plot::lines(
        &ctx.out.join("step_size.svg"),
        "4-step energy distance vs skipping step size",
        &[
            Series { name: "with estimation loop", points: with_me },
            Series { name: "single jump", points: without_me },
        ],
    )?;
    report::write_json(
        &ctx.out.join("metrics.json"),
        &json!({
            "rows": grid
                .iter()
                .zip(&outcomes)
                .map(|((k, me), o)| json!({"k": k, "me": me, "ed_4step": o.ed_4step}))
                .collect::<Vec<_>>()
        }),
    )?;
    println!("ablate step-size: {} grid points done", outcomes.len());
    Ok(())
}

pub fn guidance_scale(ctx: &RunContext, teacher: PathBuf) -> Result<()> {
    let scales = ctx.cfg.ablate.guidance_scales.clone();
    let points = scales
        .iter()
        .map(|&w| GridPoint {
            name: format!("w{w}"),
            mutate: Box::new(move |d: &mut DistillConfig| d.guidance_scale = w),
        })
        .collect();
    let outcomes = sweep(ctx, &teacher, points)?;

    let mut csv = CsvFile::create(
        &ctx.out.join("guidance_scale.csv"),
        &["w", "energy_distance", "mode_coverage"],
    )?;
    let mut curve = Vec::new();
    for (&w, o) in scales.iter().zip(&outcomes) {
        csv.row(&[fmt(w), fmt(o.ed_4step), o.coverage.to_string()])?;
        curve.push((w, o.ed_4step));
    }
    csv.finish()?;
    plot::lines(
        &ctx.out.join("guidance_scale.svg"),
        "4-step energy distance vs guidance scale",
        &[Series { name: "energy distance", points: curve }],
    )?;
    println!("ablate guidance-scale: {} scales done", outcomes.len());
    Ok(())
}

pub fn sl_vs_dl(ctx: &RunContext, teacher: PathBuf) -> Result<()> {
    let modes = [
        ("sl", DistillMode::Sl),
        ("dl", DistillMode::Dl),
        ("consistency-baseline", DistillMode::ConsistencyBaseline),
    ];
    let points = modes
        .iter()
        .map(|&(name, mode)| GridPoint {
            name: name.to_string(),
            mutate: Box::new(move |d: &mut DistillConfig| d.mode = mode),
        })
        .collect();
    let outcomes = sweep(ctx, &teacher, points)?;

    let mut csv = CsvFile::create(
        &ctx.out.join("sl_vs_dl.csv"),
        &["mode", "ed_1step", "ed_4step", "mode_coverage"],
    )?;
    for o in &outcomes {
        csv.row(&[o.name.clone(), fmt(o.ed_1step), fmt(o.ed_4step), o.coverage.to_string()])?;
    }
    csv.finish()?;
    report::write_json(
        &ctx.out.join("metrics.json"),
        &json!({
            "rows": outcomes
                .iter()
                .map(|o| json!({"mode": o.name, "ed_1step": o.ed_1step, "ed_4step": o.ed_4step}))
                .collect::<Vec<_>>()
        }),
    )?;
    println!(
        "ablate sl-vs-dl: {}",
        outcomes
            .iter()
            .map(|o| format!("{} ed4 {:.4}", o.name, o.ed_4step))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

/// Deviation-schedule gap over (t, k, gamma); no training involved.
pub fn error_surface(ctx: &RunContext) -> Result<()> {
    let sched = ctx.schedule()?;
    let grid_n = ctx.cfg.ablate.gamma_grid;
    let gammas: Vec<f64> =
        (0..grid_n).map(|i| i as f64 / (grid_n - 1) as f64).collect();
    let mut csv = CsvFile::create(&ctx.out.join("error_surface.csv"), &["t", "k", "gamma", "e_vp"])?;
    let mut curves = Vec::new();
    for &k in &ctx.cfg.ablate.error_surface_ks {
        if k == 0 || k > sched.t_max() {
            return Err(Error::Config(format!("ablate error-surface: bad k={k}")));
        }
        for t in (k..=sched.t_max()).step_by(20) {
            for &g in &gammas {
                csv.row(&[
                    t.to_string(),
                    k.to_string(),
                    fmt(g),
                    fmt(sigma_error_closed(g, t, k, &sched)),
                ])?;
            }
        }
        curves.push((k, (sched.t_max() / 2).max(k)));
    }
    csv.finish()?;

    let names: Vec<String> = curves.iter().map(|&(k, t)| format!("k={k}, t={t}")).collect();
    let series: Vec<Series> = curves
        .iter()
        .zip(&names)
        .map(|(&(k, t), name)| Series {
            name,
            points: gammas
                .iter()
                .map(|&g| (g, sigma_error_closed(g, t, k, &sched)))
                .collect(),
        })
        .collect();
    plot::lines(&ctx.out.join("error_surface.svg"), "deviation gap over gamma", &series)?;
    report::write_json(
        &ctx.out.join("metrics.json"),
        &json!({
            "ks": ctx.cfg.ablate.error_surface_ks,
            "gamma_grid": grid_n,
            "rows": ctx.cfg.ablate.error_surface_ks.len()
                * gammas.len()
                * ((sched.t_max() / 20) + 1),
        }),
    )?;
    println!("ablate error-surface: wrote gap table for {} sub-path lengths", curves.len());
    Ok(())
}
