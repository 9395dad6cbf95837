//! VTK field files and outer-iteration history tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::solver::{ErrorHistory, Evolution, State};

/// Columns of the history table, in order.
pub const HISTORY_COLUMNS: [&str; 6] = ["step", "outer_iteration", "error", "blend_count", "objective", "elapsed_seconds"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_vtk(out: &mut impl Write, mesh: &Mesh, state: &State) -> std::io::Result<()> {
    let n = mesh.node_count();
    let ne = mesh.element_count();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "damage and displacement, step {}", state.step)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for p in mesh.nodes() {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {ne} {}", 4 * ne)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    writeln!(out, "SCALARS alpha double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for a in &state.alpha {
        writeln!(out, "{a:e}")?;
    }
    writeln!(out, "VECTORS displacement double")?;
    for u in state.u.chunks_exact(2) {
        writeln!(out, "{:e} {:e} 0", u[0], u[1])?;
    }
    out.flush()
}

/// Write `state` on `mesh` as a legacy ASCII unstructured grid with point
/// data `alpha` and `displacement`. Numbers use the shortest exactly
/// round-tripping representation; missing directories are created.
pub fn export_vtk(mesh: &Mesh, state: &State, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_len("alpha", state.alpha.len(), mesh.node_count())?;
    check_len("u", state.u.len(), 2 * mesh.node_count())?;
    let mut out = create(path)?;
    write_vtk(&mut out, mesh, state).map_err(|e| Error::io(path, e))
}

/// Write one row per outer iteration with the columns in
/// [`HISTORY_COLUMNS`]; reals carry 17 significant digits.
pub fn export_history(history: &ErrorHistory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if history.steps.iter().all(|s| s.errors.is_empty()) {
        return Err(Error::invalid("history", "nothing to export"));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(HISTORY_COLUMNS)?;
    let real = |v: f64| format!("{v:.16e}");
    for s in &history.steps {
        for i in 0..s.errors.len() {
            w.write_record([
                s.step.to_string(),
                (i + 1).to_string(),
                real(s.errors[i]),
                s.blends[i].to_string(),
                real(s.objectives[i]),
                real(s.elapsed[i]),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// File name of the field file of `step` in a run of `steps` steps.
pub fn step_file_name(step: usize, steps: usize) -> String {
    let width = steps.saturating_sub(1).to_string().len().max(3);
    format!("step_{step:0width$}.vtk")
}

/// Write every step's fields and the history into `dir`; returns the field
/// files in step order.
pub fn export_evolution(evolution: &Evolution, total_steps: usize, dir: impl AsRef<Path>, history_name: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(evolution.steps.len());
    for s in &evolution.steps {
        let path = dir.join(step_file_name(s.state.step, total_steps));
        export_vtk(&s.mesh, &s.state, &path)?;
        files.push(path);
    }
    if evolution.history.steps.iter().any(|s| !s.errors.is_empty()) {
        export_history(&evolution.history, dir.join(history_name))?;
    }
    Ok(files)
}
