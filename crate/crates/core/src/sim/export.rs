use std::io::Write;

use crate::error::Result;
use crate::kronalg::vech;

use super::PathSample;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn vech_labels(prefix: &str, d: usize) -> Vec<String> {
    let mut out = Vec::new();
    for j in 0..d {
        for i in j..d {
            out.push(format!("{prefix}_{}_{}", i + 1, j + 1));
        }
    }
    out
}

/// One row per grid point: `t`, `vech(Y)`, `vech(V)`, `G`.
pub fn write_path_csv<W: Write>(path: &PathSample, w: W) -> Result<()> {
    let d = path.y0.nrows();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(vech_labels("y", d));
    header.extend(vech_labels("v", d));
    header.extend((1..=d).map(|i| format!("g_{i}")));
    wr.write_record(&header)?;
    for k in 0..path.grid.len() {
        let mut row = vec![fmt(path.grid[k])];
        row.extend(vech(&path.y[k]).into_iter().map(fmt));
        row.extend(vech(&path.v[k]).into_iter().map(fmt));
        row.extend(path.g[k].iter().map(|&v| fmt(v)));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// One row per jump: time, `vech(V_{t-})`, `x`, `vech(Y_t)`.
pub fn write_jumps_csv<W: Write>(path: &PathSample, w: W) -> Result<()> {
    let d = path.y0.nrows();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(vech_labels("v_pre", d));
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend(vech_labels("y_post", d));
    wr.write_record(&header)?;
    for r in &path.jumps {
        let mut row = vec![fmt(r.time)];
        row.extend(vech(&r.v_pre).into_iter().map(fmt));
        row.extend(r.x.iter().map(|&v| fmt(v)));
        row.extend(vech(&r.y_post).into_iter().map(fmt));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
