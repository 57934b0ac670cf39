//! Trace and summary files.
//!
//! Trace CSV (format 1), one row per step, columns in this order:
//!
//! ```text
//! t, u_0..u_{n_u-1}, y_0..y_{n_y-1}, w_0..w_{n_y-1}, stage_cost, status,
//! solver_iterations, fps_rows, fps_vertices, fps_volume,
//! mean_0.., nominal_0.., cheb_0.. (n_y n_u m each),
//! violation, witness_residual, truth_in_fps, fps_nested
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! value, so export, import and export again reproduces the file byte for
//! byte. Booleans are `0`/`1`; missing values are `NaN`.
//!
//! Summaries are TOML documents mirroring [`MonteCarloSummary`].

use std::path::Path;

use asmpc_core::solver::SolveStatus;
use nalgebra::DVector;

use crate::error::SimError;
use crate::montecarlo::MonteCarloSummary;
use crate::run::StepRecord;

pub const TRACE_FORMAT_VERSION: u32 = 1;

fn check_path(path: &Path) -> Result<(), SimError> {
    if path.as_os_str().is_empty() {
        return Err(SimError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "empty output path",
        )));
    }
    Ok(())
}

fn header(n_u: usize, n_y: usize, n_p: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let mut push = |prefix: &str, n: usize| h.extend((0..n).map(|i| format!("{prefix}_{i}")));
    push("u", n_u);
    push("y", n_y);
    push("w", n_y);
    let mut h2: Vec<String> = [
        "stage_cost",
        "status",
        "solver_iterations",
        "fps_rows",
        "fps_vertices",
        "fps_volume",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.append(&mut h2);
    for prefix in ["mean", "nominal", "cheb"] {
        h.extend((0..n_p).map(|i| format!("{prefix}_{i}")));
    }
    h.extend(
        ["violation", "witness_residual", "truth_in_fps", "fps_nested"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn status_str(s: SolveStatus) -> String {
    s.to_string()
}

fn parse_status(s: &str) -> Result<SolveStatus, SimError> {
    match s {
        "optimal" => Ok(SolveStatus::Optimal),
        "infeasible" => Ok(SolveStatus::Infeasible),
        "unbounded" => Ok(SolveStatus::Unbounded),
        "solver_failure" => Ok(SolveStatus::SolverFailure),
        other => Err(SimError::Format(format!("unknown status '{other}'"))),
    }
}

/// Writes the steps of a trace as CSV to any writer.
pub fn write_trace<W: std::io::Write>(steps: &[StepRecord], out: W) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(out);
    let Some(first) = steps.first() else {
        return Err(SimError::Format("trace has no steps".into()));
    };
    let (n_u, n_y, n_p) = (first.u.len(), first.y.len(), first.mean.len());
    wtr.write_record(header(n_u, n_y, n_p))?;
    for s in steps {
        let mut rec = vec![s.t.to_string()];
        for v in [&s.u, &s.y, &s.w] {
            rec.extend(v.iter().map(|x| x.to_string()));
        }
        rec.push(s.stage_cost.to_string());
        rec.push(status_str(s.status));
        rec.push(s.solver_iterations.to_string());
        rec.push(s.fps_rows.to_string());
        rec.push(s.fps_vertices.to_string());
        rec.push(s.fps_volume.to_string());
        for v in [&s.mean, &s.nominal, &s.cheb_center] {
            rec.extend(v.iter().map(|x| x.to_string()));
        }
        rec.push(flag(s.violation));
        rec.push(s.witness_residual.to_string());
        rec.push(flag(s.truth_in_fps));
        rec.push(flag(s.fps_nested));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn export_trace(steps: &[StepRecord], path: &Path) -> Result<(), SimError> {
    check_path(path)?;
    let file = std::fs::File::create(path)?;
    write_trace(steps, std::io::BufWriter::new(file))
}

pub fn read_trace<R: std::io::Read>(input: R) -> Result<Vec<StepRecord>, SimError> {
    let mut rdr = csv::Reader::from_reader(input);
    let head = rdr.headers()?.clone();
    let count = |prefix: &str| {
        head.iter()
            .filter(|h| h.starts_with(prefix) && h[prefix.len()..].parse::<usize>().is_ok())
            .count()
    };
    let (n_u, n_y, n_p) = (count("u_"), count("y_"), count("mean_"));
    let expected = header(n_u, n_y, n_p);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(SimError::Format("unexpected trace header".into()));
    }
    let mut steps = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut cur = Cursor {
            fields: row.iter().collect(),
            pos: 0,
        };
        let t = cur.int()?;
        let u = cur.vec(n_u)?;
        let y = cur.vec(n_y)?;
        let w = cur.vec(n_y)?;
        let stage_cost = cur.float()?;
        let status = parse_status(cur.next()?)?;
        let solver_iterations = cur.int()?;
        let fps_rows = cur.int()?;
        let fps_vertices = cur.int()?;
        let fps_volume = cur.float()?;
        let mean = cur.vec(n_p)?;
        let nominal = cur.vec(n_p)?;
        let cheb_center = cur.vec(n_p)?;
        let violation = cur.flag()?;
        let witness_residual = cur.float()?;
        let truth_in_fps = cur.flag()?;
        let fps_nested = cur.flag()?;
        steps.push(StepRecord {
            t,
            u,
            y,
            w,
            stage_cost,
            status,
            solver_iterations,
            fps_rows,
            fps_vertices,
            fps_volume,
            mean,
            nominal,
            cheb_center,
            violation,
            witness_residual,
            truth_in_fps,
            fps_nested,
        });
    }
    Ok(steps)
}

struct Cursor<'a> {
    fields: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str, SimError> {
        let v = self
            .fields
            .get(self.pos)
            .ok_or_else(|| SimError::Format("short row".into()))?;
        self.pos += 1;
        Ok(v)
    }

    fn float(&mut self) -> Result<f64, SimError> {
        let s = self.next()?;
        s.parse().map_err(|e| SimError::Format(format!("'{s}': {e}")))
    }

    fn int(&mut self) -> Result<usize, SimError> {
        let s = self.next()?;
        s.parse().map_err(|e| SimError::Format(format!("'{s}': {e}")))
    }

    fn flag(&mut self) -> Result<bool, SimError> {
        match self.next()? {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(SimError::Format(format!("bad flag '{other}'"))),
        }
    }

    fn vec(&mut self, len: usize) -> Result<DVector<f64>, SimError> {
        let mut v = DVector::zeros(len);
        for i in 0..len {
            v[i] = self.float()?;
        }
        Ok(v)
    }
}

pub fn import_trace(path: &Path) -> Result<Vec<StepRecord>, SimError> {
    check_path(path)?;
    read_trace(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn summary_to_toml(summary: &MonteCarloSummary) -> Result<String, SimError> {
    toml::to_string(summary).map_err(|e| SimError::Format(e.to_string()))
}

pub fn summary_from_toml(text: &str) -> Result<MonteCarloSummary, SimError> {
    toml::from_str(text).map_err(|e| SimError::Format(e.to_string()))
}

pub fn export_summary(summary: &MonteCarloSummary, path: &Path) -> Result<(), SimError> {
    check_path(path)?;
    std::fs::write(path, summary_to_toml(summary)?)?;
    Ok(())
}

pub fn import_summary(path: &Path) -> Result<MonteCarloSummary, SimError> {
    check_path(path)?;
    summary_from_toml(&std::fs::read_to_string(path)?)
}
