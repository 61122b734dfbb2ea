//! CSV, JSON and gnuplot artifacts.

use netheat::field::{RodField, SolutionField};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// One row per (t, x), times outermost, 17 significant digits.
pub fn rod_csv(rod: &RodField) -> String {
    let mut s = String::from("rod_id,x,t,q,imag_residual\n");
    for (j, t) in rod.t.iter().enumerate() {
        for (i, x) in rod.x.iter().enumerate() {
            writeln!(s, "{},{:.16e},{:.16e},{:.16e},{:.16e}", rod.rod, x, t, rod.q[j][i], rod.imag[j][i]).unwrap();
        }
    }
    s
}

pub fn write_fields(dir: &Path, solver: &str, field: &SolutionField) -> io::Result<()> {
    for rod in &field.rods {
        fs::write(dir.join(format!("{solver}_{}.csv", rod.rod)), rod_csv(rod))?;
    }
    Ok(())
}

/// Per-rod and overall max/mean absolute differences. `None` if the fields are not sampled alike.
pub fn comparison_csv(a: &SolutionField, b: &SolutionField) -> Option<(String, f64)> {
    let mut s = String::from("rod_id,max_abs_diff,mean_abs_diff\n");
    for ra in &a.rods {
        let rb = b.rod(&ra.rod)?;
        let d: Vec<f64> = ra.q.iter().flatten().zip(rb.q.iter().flatten()).map(|(u, v)| (u - v).abs()).collect();
        let max = d.iter().copied().fold(0.0, f64::max);
        let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
        writeln!(s, "{},{max:.16e},{mean:.16e}", ra.rod).unwrap();
    }
    let (max, mean) = a.compare(b)?;
    writeln!(s, "all,{max:.16e},{mean:.16e}").unwrap();
    Some((s, max))
}

/// Profiles q(x) at every output time, one panel per rod.
pub fn gnuplot(fields: &[(&str, &SolutionField)]) -> String {
    let mut s = String::from("set datafile separator ','\nset key outside\nset xlabel 'x'\nset ylabel 'q'\n");
    let Some((_, first)) = fields.first() else { return s };
    for rod in &first.rods {
        writeln!(s, "set title 'rod {}'", rod.rod).unwrap();
        let mut curves = Vec::new();
        for (solver, _) in fields {
            for (j, t) in rod.t.iter().enumerate() {
                let style = if *solver == "fdm" { "points pt 7 ps 0.4" } else { "lines" };
                curves.push(format!(
                    "'{solver}_{}.csv' every ::{}::{} using 2:4 with {style} title '{solver} t={t}'",
                    rod.rod,
                    j * rod.x.len(),
                    (j + 1) * rod.x.len() - 1
                ));
            }
        }
        writeln!(s, "plot {}", curves.join(", \\\n     ")).unwrap();
        s.push_str("pause -1\n");
    }
    s
}
