use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{spectral_check, stationarity_report};
use crate::error::{Error, Result};
use crate::kronalg::{unvec, Mat, Vector};
use crate::moments::analytic_report;
use crate::sim::{counterexample, cp_approximation_ladder, simulate_paths, write_jumps_csv, write_path_csv, InitialState};

use super::config::{Experiment, Report};
use super::validation::{lookup, Settings, Suite};
use super::Status;

pub(crate) fn mat_json(m: &Mat) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())).collect())
}

fn fmt_mat(m: &Mat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format!("{:.12e}", m[(i, j)])).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Version string in `git describe` style.
pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

pub fn simulate(exp: &Experiment, seed: u64, dir: &Path, w: &mut dyn Write) -> Result<Status> {
    let run = &exp.config.run;
    let paths = simulate_paths(&exp.params, &exp.levy, &exp.grid, seed, run.n_paths, &exp.sim)?;
    let reports = &exp.config.outputs.reports;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        if reports.contains(&Report::Paths) {
            let mut buf = Vec::new();
            write_path_csv(p, &mut buf)?;
            files.push((format!("path_{i:04}.csv"), buf));
        }
        if reports.contains(&Report::Jumps) {
            let mut buf = Vec::new();
            write_jumps_csv(p, &mut buf)?;
            files.push((format!("jumps_{i:04}.csv"), buf));
        }
    }
    if reports.contains(&Report::Ladder) && !run.eps_ladder.is_empty() {
        let y0 = match &exp.sim.initial {
            InitialState::Given(y) => y.clone(),
            _ => Mat::zeros(exp.params.dim(), exp.params.dim()),
        };
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["path", "eps", "distance", "jumps"])?;
        for i in 0..run.n_paths {
            let r = cp_approximation_ladder(&exp.params, &exp.levy, &exp.grid, &run.eps_ladder, seed, i as u64, &y0)?;
            for k in 0..r.eps.len() {
                wr.write_record([
                    i.to_string(),
                    format!("{:.16e}", r.eps[k]),
                    format!("{:.16e}", r.distances[k]),
                    r.jump_counts[k].to_string(),
                ])?;
            }
        }
        let buf = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        files.push(("ladder.csv".into(), buf));
    }
    prepare_dir(dir)?;
    let mut listed = Vec::new();
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
        listed.push(json!({ "name": name, "sha256": sha256_hex(bytes) }));
    }
    let manifest = json!({
        "version": version(),
        "seed": seed,
        "config_sha256": exp.config_hash,
        "n_paths": run.n_paths,
        "horizon": run.horizon,
        "grid_step": run.grid_step,
        "files": listed,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let jumps: usize = paths.iter().map(|p| p.jumps.len()).sum();
    let d = exp.params.dim();
    let mut mean_v = Mat::zeros(d, d);
    let mut count = 0usize;
    for p in &paths {
        for v in &p.v {
            mean_v += v;
            count += 1;
        }
    }
    mean_v /= count as f64;
    writeln!(w, "paths = {}", run.n_paths)?;
    writeln!(w, "grid_points = {}", exp.grid.len())?;
    writeln!(w, "jumps = {jumps}")?;
    writeln!(w, "time_average_v = {}", fmt_mat(&mean_v))?;
    writeln!(w, "output = {}", dir.display())?;
    Ok(Status::Pass)
}

pub fn moments(exp: &Experiment, dir: &Path, w: &mut dyn Write) -> Result<Status> {
    let ops = exp.params.operators(&exp.levy)?;
    let sp = spectral_check(exp.params.b(), &ops);
    let mut text = String::new();
    let _ = writeln!(text, "max_re_b = {:.12e}", sp.max_re_b);
    let _ = writeln!(text, "max_re_curly_b = {:.12e}", sp.max_re_curly_b);
    let _ = writeln!(text, "max_re_curly_c = {:.12e}", sp.max_re_curly_c);
    if !sp.all_stable() {
        let _ = writeln!(text, "stationary = false");
        w.write_all(text.as_bytes())?;
        prepare_dir(dir)?;
        std::fs::write(dir.join("moments.txt"), &text)?;
        return Ok(Status::Fail);
    }
    let run = &exp.config.run;
    let r = analytic_report(&ops, exp.params.c(), exp.levy.sigma_w, run.delta, &run.lags)?;
    let as_mat = |v: &Vector| unvec(v);
    let _ = writeln!(text, "stationary = true");
    let _ = writeln!(text, "mean_y = {}", fmt_mat(&as_mat(&r.mean_y)?));
    let _ = writeln!(text, "mean_v = {}", fmt_mat(&as_mat(&r.mean_v)?));
    let _ = writeln!(text, "var_vec_y = {}", fmt_mat(&r.var_y));
    for (h, a) in &r.acov {
        let _ = writeln!(text, "acov_vec_y[{h}] = {}", fmt_mat(a));
    }
    let _ = writeln!(text, "increment_delta = {}", r.increments.delta);
    let _ = writeln!(text, "increment_var = {}", fmt_mat(&r.increments.var));
    w.write_all(text.as_bytes())?;

    let doc = json!({
        "mean_y": mat_json(&as_mat(&r.mean_y)?),
        "mean_v": mat_json(&as_mat(&r.mean_v)?),
        "second_moment_vec_y": mat_json(&r.second_moment),
        "var_vec_y": mat_json(&r.var_y),
        "acov_vec_y": r.acov.iter().map(|(h, a)| json!({ "lag": h, "value": mat_json(a) })).collect::<Vec<_>>(),
        "increment": { "delta": r.increments.delta, "var": mat_json(&r.increments.var) },
    });
    prepare_dir(dir)?;
    std::fs::write(dir.join("moments.txt"), &text)?;
    std::fs::write(dir.join("moments.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(Status::Pass)
}

pub fn check(exp: &Experiment, seed: u64, dir: &Path, w: &mut dyn Write) -> Result<Status> {
    let report = stationarity_report(&exp.params, &exp.levy, &exp.check_options(seed))?;
    let text = report.to_key_value();
    w.write_all(text.as_bytes())?;
    prepare_dir(dir)?;
    std::fs::write(dir.join("check.txt"), &text)?;
    std::fs::write(dir.join("check.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(Status::Pass)
}

pub fn counterexample_cmd(dir: Option<&Path>, w: &mut dyn Write) -> Result<Status> {
    let r = counterexample()?;
    let q_err = (r.quadratic_form + 2.75).abs();
    let exp_err = (&r.exp_b - &r.exp_b_expected).amax();
    let mut text = String::new();
    let _ = writeln!(text, "b = {}", fmt_mat(&r.b));
    let _ = writeln!(text, "exp_b = {}", fmt_mat(&r.exp_b));
    let _ = writeln!(text, "exp_b_error = {exp_err:.3e}");
    let _ = writeln!(text, "v0 = {}", fmt_mat(&r.v0));
    let _ = writeln!(text, "v1 = {}", fmt_mat(&r.v1));
    let _ = writeln!(text, "x = [{}, {}]", r.x[0], r.x[1]);
    let _ = writeln!(text, "x_v1_x = {:.17e}", r.quadratic_form);
    let _ = writeln!(text, "min_eigenvalue_v1 = {:.17e}", r.min_eigenvalue);
    let ok = q_err <= 1e-12 && exp_err <= 1e-12 && r.min_eigenvalue < 0.0;
    let _ = writeln!(text, "result = {}", if ok { "PASS" } else { "FAIL" });
    w.write_all(text.as_bytes())?;
    if let Some(dir) = dir {
        prepare_dir(dir)?;
        std::fs::write(dir.join("counterexample.txt"), &text)?;
    }
    Ok(if ok { Status::Pass } else { Status::Fail })
}

pub fn validate(settings: Settings, only: Option<&str>, dir: Option<&Path>, w: &mut dyn Write) -> Result<Status> {
    let only = match only {
        Some(name) => Some(lookup(name).ok_or_else(|| Error::Config(format!("unknown criterion '{name}'")))?),
        None => None,
    };
    let suite = Suite::new(settings);
    let mut rows = Vec::new();
    let mut all = true;
    for (id, _) in super::validation::CRITERIA.iter().filter(|(id, _)| only.is_none_or(|o| o == *id)) {
        let o = suite.run(*id)?;
        writeln!(w, "{o}")?;
        w.flush()?;
        all &= o.passed;
        rows.push(o);
    }
    let failed: Vec<&str> = rows.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        writeln!(w, "all {} criteria passed", rows.len())?;
    } else {
        writeln!(w, "failed: {}", failed.join(", "))?;
    }
    if let Some(dir) = dir {
        prepare_dir(dir)?;
        let mut wr = csv::Writer::from_path(dir.join("validation.csv"))?;
        wr.write_record(["id", "name", "tolerance", "observed", "seconds", "budget", "passed"])?;
        for o in &rows {
            wr.write_record([
                o.id.to_string(),
                o.name.to_string(),
                o.tolerance.clone(),
                o.observed.clone(),
                format!("{:.3}", o.seconds),
                o.budget.map_or(String::new(), |b| b.to_string()),
                o.passed.to_string(),
            ])?;
        }
        wr.flush()?;
    }
    Ok(if all { Status::Pass } else { Status::Fail })
}
