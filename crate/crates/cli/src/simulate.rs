//! `simulate`: integrate a configured trajectory, export per-sample
//! diagnostics as CSV, and write the drift maxima to a JSON sidecar.

use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

use nambu_core::{drift_report, evolve, DynamicsError, Trajectory};

use crate::config;
use crate::CliError;

/// Drift maxima over the whole run, serialized to `<out>.summary.json`.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary {
    final_s: f64,
    samples: usize,
    /// `max_t |C_n(s_t) − C_n(0)|`, `n = 1..4`.
    max_casimir_drift: [f64; 4],
    max_hermiticity_residual: f64,
    /// Largest displacement of any tracked eigenvalue of `ρ·G⁻¹`.
    max_spectral_drift: f64,
}

pub fn run(config_path: &Path, out_override: Option<&Path>) -> Result<(), CliError> {
    let built = config::load(config_path)?;
    let out: PathBuf = match (out_override, &built.output) {
        (Some(path), _) => path.to_path_buf(),
        (None, Some(path)) => path.clone(),
        (None, None) => {
            return Err(CliError::Config(
                "no output path: pass --out or set `output` in the config".into(),
            ));
        }
    };

    let trajectory = evolve(
        &built.metric,
        &built.state,
        &built.hamiltonian,
        &built.s_functional,
        built.integrator,
    )
    .map_err(map_dynamics_error)?;
    let report = drift_report(&trajectory).map_err(map_dynamics_error)?;

    write_csv(&out, &trajectory)?;
    let summary_path = sidecar_path(&out);
    let summary = Summary {
        final_s: report.final_s,
        samples: report.samples,
        max_casimir_drift: report.max_casimir_drift,
        max_hermiticity_residual: report.max_hermiticity_residual,
        max_spectral_drift: report.max_spectral_drift,
    };
    let text = serde_json::to_string_pretty(&summary)
        .expect("summary struct always serializes");
    std::fs::write(&summary_path, text.as_bytes())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", summary_path.display())))?;

    println!(
        "wrote {} samples to {} (summary: {})",
        trajectory.samples.len(),
        out.display(),
        summary_path.display()
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".summary.json");
    PathBuf::from(name)
}

/// Divergence keeps its dedicated exit code; everything else the integrator
/// can reject was asked for by the config.
fn map_dynamics_error(err: DynamicsError) -> CliError {
    match err {
        DynamicsError::Diverged { .. } => CliError::Divergence(err.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn write_csv(path: &Path, trajectory: &Trajectory) -> Result<(), CliError> {
    let io_err =
        |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    let dim = trajectory
        .samples
        .first()
        .map(|s| s.eigenvalues.len())
        .unwrap_or(0);

    let mut header = String::from("s,C1_re,C1_im,C2_re,C2_im,C3_re,C3_im,C4_re,C4_im,herm_residual");
    for k in 1..=dim {
        header.push_str(&format!(",eig_{k}_re,eig_{k}_im"));
    }
    writeln!(w, "{header}").map_err(io_err)?;

    for sample in &trajectory.samples {
        write!(w, "{}", sample.s).map_err(io_err)?;
        for c in &sample.casimirs {
            write!(w, ",{:e},{:e}", c.re, c.im).map_err(io_err)?;
        }
        write!(w, ",{:e}", sample.hermiticity_residual).map_err(io_err)?;
        for ev in &sample.eigenvalues {
            write!(w, ",{:e},{:e}", ev.re, ev.im).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
