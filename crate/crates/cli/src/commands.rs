use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use seqimp::data::{extract_windows, load_csv, split_train_test, synth as make_series, NormStats, RawCsv, SynthSpec};
use seqimp::eval::{borda, borda_csv, borda_text, run_benchmark, BenchDataset, Metric, MetricPair};
use seqimp::gradcheck::{run_gradcheck, GradCheckConfig};
use seqimp::model::{forward, impute as impute_gap, Checkpoint, ModelParams, ScalingSchedule, ScheduleVariant};
use seqimp::numerics::Vector;
use seqimp::optim::{holdout_tail, train as train_model, EarlyStopPolicy};

use crate::config::RunConfig;
use crate::{GapSpec, GradcheckArgs, ImputeArgs, RunArgs, SynthArgs, EXIT_ERROR, EXIT_OK, EXIT_PARTIAL};

pub fn synth(a: &SynthArgs) -> Result<i32> {
    let spec = SynthSpec {
        kind: a.kind.parse()?,
        n: a.n,
        noise_std: a.noise,
        period: a.period,
        seed: a.seed,
    };
    let table = make_series(&spec)?;
    table.write_csv(&a.out, "NA")?;
    println!(
        "wrote {} rows of {} to {}",
        table.n_rows(),
        spec.kind.as_str(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn load_run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.training.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.output.dir = out.clone();
    }
    if let Some(v) = &a.variant {
        v.parse::<ScheduleVariant>()?;
        cfg.model.schedule = v.clone();
    }
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            bail!("--jobs must be >= 1");
        }
        cfg.eval.get_or_insert_with(Default::default).jobs = jobs;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Pooled denormalized test metrics of the merged output over all columns.
fn test_metrics(
    params: &ModelParams,
    norm: &NormStats,
    windows: &[seqimp::model::ImputationWindow],
) -> Result<MetricPair> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for w in windows {
        let schedule = ScalingSchedule::new(w.gap_len(), params.config().schedule)?;
        let trace = forward(params, w, &schedule)?;
        for (t, p) in w.missing.iter().zip(&trace.merged) {
            for c in 0..t.len() {
                truth.push(norm.denormalize_value(c, t[c]));
                pred.push(norm.denormalize_value(c, p[c]));
            }
        }
    }
    Ok(MetricPair::compute(&truth, &pred)?)
}

pub fn train(a: &RunArgs) -> Result<i32> {
    let cfg = load_run_config(a)?;
    let Some(data_path) = &cfg.data.path else {
        bail!("invalid config value at data.path: required for train");
    };
    let table = load_csv(data_path, &cfg.csv_options()?)?;
    let model_cfg = cfg.model_config(table.n_cols())?;
    let spec = cfg.window_spec()?;
    let (train_rows, test_rows) = split_train_test(&table, cfg.data.test_fraction)?;
    let norm = NormStats::from_table(&train_rows)?;
    let windows = extract_windows(&norm.normalize(&train_rows)?, &spec)?;
    let n_windows = windows.len();
    let (train_w, val_w) = holdout_tail(windows, cfg.training.val_fraction)
        .with_context(|| format!("{} training rows give {n_windows} windows", train_rows.n_rows()))?;
    println!(
        "{} rows ({} train, {} test), {} train / {} validation windows, model {}",
        table.n_rows(),
        train_rows.n_rows(),
        test_rows.n_rows(),
        train_w.len(),
        val_w.len(),
        model_cfg
    );
    let policy = EarlyStopPolicy::new(cfg.training.patience, cfg.training.min_delta)?;
    let (params, log) = train_model(model_cfg, &train_w, &val_w, policy, &cfg.train_config())?;
    print!("{}", log.to_table());

    let test_spec = spec.with_stride(cfg.data.eval_stride.unwrap_or(spec.gap));
    let test_w = extract_windows(&norm.normalize(&test_rows)?, &test_spec)?;
    if test_w.is_empty() {
        println!("no complete test window; test metrics skipped");
    } else {
        let m = test_metrics(&params, &norm, &test_w)?;
        println!("test: {} windows, MAE {:.6}, MRE {:.6}", test_w.len(), m.mae, m.mre);
    }

    create_dir(&cfg.output.dir)?;
    let ckpt = cfg.output.dir.join("model.ckpt");
    Checkpoint {
        params,
        norm,
        window: spec,
    }
    .save(&ckpt)?;
    let log_path = cfg.output.dir.join("train_log.csv");
    write_file(&log_path, &log.to_csv())?;
    println!("wrote {} and {}", ckpt.display(), log_path.display());
    Ok(EXIT_OK)
}

fn parse_cell(raw: &RawCsv, markers: &[String], row: usize, col: usize, names: &[String]) -> Result<Option<f64>> {
    let cell = raw.records[row][col].trim();
    if markers.iter().any(|m| m == cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => bail!(
            "line {}, column {:?}: cannot parse {cell:?} as a number",
            raw.line_of(row),
            names[col]
        ),
    }
}

pub fn impute(a: &ImputeArgs) -> Result<i32> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let opts = cfg.csv_options()?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let variant = match &a.variant {
        Some(v) => v.parse()?,
        None => ck.params.config().schedule,
    };
    let mut raw = RawCsv::read(&a.data, opts.header, &opts.missing_markers)?;
    let names = raw.column_names();
    let cols: Vec<usize> = ck
        .norm
        .columns
        .iter()
        .map(|c| raw.resolve(&seqimp::data::ColumnRef::Name(c.name.clone())))
        .collect::<seqimp::Result<_>>()
        .context("data file lacks a column the checkpoint was trained on")?;
    let n = raw.records.len();

    let gaps: Vec<GapSpec> = a.gaps.iter().copied().filter(|g| g.length > 0).collect();
    let mut in_gap = vec![false; n];
    for g in &gaps {
        if g.rows().end > n {
            bail!("gap {g} extends past the last data row ({n})");
        }
        for r in g.rows() {
            if in_gap[r] {
                bail!("gap {g} overlaps another gap at row {}", r + 1);
            }
            in_gap[r] = true;
        }
    }
    let (lb, la) = (ck.window.before, ck.window.after);
    let mut filled = 0;
    for g in &gaps {
        let rows = g.rows();
        if rows.start < lb {
            bail!(
                "gap {g} needs {lb} observed rows before it but starts at row {}",
                g.start
            );
        }
        if rows.end + la > n {
            bail!(
                "gap {g} needs {la} observed rows after it but only {} remain",
                n - rows.end
            );
        }
        let context = |r: usize| -> Result<Vector> {
            if in_gap[r] {
                bail!("gap {g}: context row {} lies inside another gap", r + 1);
            }
            let mut v = Vec::with_capacity(cols.len());
            for (k, &c) in cols.iter().enumerate() {
                match parse_cell(&raw, &opts.missing_markers, r, c, &names)? {
                    Some(x) => v.push(ck.norm.normalize_value(k, x)),
                    None => bail!(
                        "gap {g}: context row {} has a missing value in column {:?}",
                        r + 1,
                        names[c]
                    ),
                }
            }
            Ok(Vector::from(v))
        };
        let before = (rows.start - lb..rows.start).map(context).collect::<Result<Vec<_>>>()?;
        let after = (rows.end..rows.end + la).map(context).collect::<Result<Vec<_>>>()?;
        let pred = impute_gap(&ck.params, &before, &after, g.length, variant)?;
        for (r, p) in rows.zip(&pred) {
            for (k, &c) in cols.iter().enumerate() {
                raw.records[r][c] = format!("{}", ck.norm.denormalize_value(k, p[k]));
                filled += 1;
            }
        }
    }
    raw.write(&a.out)?;
    println!(
        "filled {filled} cells in {} gaps; wrote {}",
        gaps.len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn eval_datasets(cfg: &RunConfig) -> Result<Vec<BenchDataset>> {
    let opts = cfg.csv_options()?;
    let entries: Vec<(String, PathBuf, Vec<String>)> = match &cfg.eval {
        Some(e) if !e.datasets.is_empty() => e
            .datasets
            .iter()
            .map(|d| (d.name.clone(), d.path.clone(), d.columns.clone()))
            .collect(),
        _ => {
            let Some(p) = &cfg.data.path else {
                bail!("invalid config value at eval.datasets: no datasets and no data.path");
            };
            let name = p
                .file_stem()
                .map_or("data".into(), |s| s.to_string_lossy().into_owned());
            vec![(name, p.clone(), cfg.data.columns.clone())]
        }
    };
    let mut out = Vec::new();
    for (name, path, columns) in entries {
        let mut o = opts.clone();
        o.columns = columns.iter().map(|c| seqimp::data::ColumnRef::parse(c)).collect();
        let table = load_csv(&path, &o).with_context(|| format!("dataset {name:?}"))?;
        out.extend(BenchDataset::from_table(&name, &table));
    }
    Ok(out)
}

pub fn eval(a: &RunArgs) -> Result<i32> {
    let cfg = load_run_config(a)?;
    cfg.validate()?;
    let datasets = eval_datasets(&cfg)?;
    let variants = cfg.variants()?;
    let bench = cfg.bench_config()?;
    println!("evaluating {} variants on {} series", variants.len(), datasets.len());
    let report = run_benchmark(&datasets, &variants, &bench)?;
    let tables = Metric::ALL
        .iter()
        .map(|&m| borda(&report, m))
        .collect::<seqimp::Result<Vec<_>>>()?;

    let text = format!("{}\n{}", report.to_text(Metric::Mae), report.to_text(Metric::Mre));
    let btext = borda_text(&tables);
    print!("{text}\n{btext}");
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    write_file(&dir.join("report.txt"), &text)?;
    write_file(&dir.join("report.csv"), &report.to_csv())?;
    write_file(&dir.join("borda.txt"), &btext)?;
    write_file(&dir.join("borda.csv"), &borda_csv(&tables))?;
    println!("wrote report and Borda tables to {}", dir.display());
    let failed = report.failed_cells().len();
    if failed > 0 {
        eprintln!("{failed} benchmark cells failed");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<i32> {
    let cfg = GradCheckConfig {
        seed: a.seed,
        instances: a.instances,
        max_input_dim: a.max_input_dim,
        max_hidden: a.max_hidden,
        max_gap: a.max_gap,
        tolerance: a.tolerance,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&cfg, a.corrupt)?;
    for r in &report.instances {
        println!(
            "instance {:>3}: input {} hidden {} gap {} {:?} {:?}{}  params {:>5}  max rel error {:.3e} at {}",
            r.index,
            r.config.input_dim,
            r.config.hidden_dim,
            r.gap,
            r.config.schedule,
            r.config.topology,
            if r.config.merge_hidden.is_some() {
                " mlp-merge"
            } else {
                ""
            },
            r.num_params,
            r.max_rel_error,
            r.worst_path
        );
    }
    let Some(worst) = report.worst() else {
        bail!("no instances were checked");
    };
    println!(
        "max relative error {:.3e} at instance {} {} (analytic {:.6e}, numeric {:.6e}); tolerance {:.1e}",
        worst.max_rel_error, worst.index, worst.worst_path, worst.analytic, worst.numeric, report.tolerance
    );
    if report.passed() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_ERROR)
    }
}
