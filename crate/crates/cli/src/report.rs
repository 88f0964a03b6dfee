use std::path::Path;

use serde_json::{json, Value};

use crate::args::ReportArgs;
use crate::commands::VERSION;
use crate::{CliError, CliResult, Output};

struct Input {
    source: String,
    command: String,
    doc: Value,
}

fn load(path: &Path) -> CliResult<Input> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Domain(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Domain(format!("{} is not a JSON document: {e}", path.display())))?;
    let command = doc
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Domain(format!("{} has no \"command\" field", path.display())))?
        .to_string();
    Ok(Input {
        source: path.display().to_string(),
        command,
        doc,
    })
}

fn field(doc: &Value, path: &[&str]) -> Value {
    path.iter()
        .try_fold(doc, |v, key| v.get(key))
        .cloned()
        .unwrap_or(Value::Null)
}

pub fn report(a: &ReportArgs) -> CliResult<Output> {
    if a.inputs.is_empty() {
        return Err(CliError::Domain("report needs at least one input document".into()));
    }
    let mut inputs = a.inputs.iter().map(|p| load(p)).collect::<CliResult<Vec<_>>>()?;
    inputs.sort_by(|x, y| (&x.command, &x.source).cmp(&(&y.command, &y.source)));

    let mut fits = Vec::new();
    let mut regimes = Vec::new();
    let mut tv = Vec::new();
    let mut seeds = Vec::new();
    let mut quadrature = Vec::new();
    for i in &inputs {
        match i.command.as_str() {
            "cumulants" => fits.push(json!({
                "source": i.source,
                "model": field(&i.doc, &["model", "id"]),
                "kappa3_exponent": field(&i.doc, &["fits", "kappa3", "exponent"]),
                "kappa4_exponent": field(&i.doc, &["fits", "kappa4", "exponent"]),
                "sandwich_violations": field(&i.doc, &["sandwich_violations"]),
            })),
            "rates" => regimes.push(json!({
                "source": i.source,
                "H": field(&i.doc, &["H"]),
                "beta": field(&i.doc, &["beta"]),
                "regime": field(&i.doc, &["regime"]),
                "M_n": field(&i.doc, &["M_n"]),
                "band_factor": field(&i.doc, &["band_factor"]),
                "ratio_slope": field(&i.doc, &["ratio_slope"]),
                "normal": field(&i.doc, &["normal_convergence", "normal"]),
            })),
            "tvbound" => tv.push(json!({
                "source": i.source,
                "config": field(&i.doc, &["config"]),
                "fits": field(&i.doc, &["fits"]),
                "last": i.doc.get("rows").and_then(Value::as_array).and_then(|r| r.last()).cloned(),
            })),
            _ => {}
        }
        let quad = match field(&i.doc, &["quadrature"]) {
            Value::Null => field(&i.doc, &["config", "quad"]),
            q => q,
        };
        if !quad.is_null() {
            quadrature.push(json!({ "source": i.source, "command": i.command, "settings": quad }));
        }
        if let Some(seed) = i.doc.get("seed").filter(|s| !s.is_null()) {
            seeds.push(json!({ "source": i.source, "command": i.command, "seed": seed }));
        }
    }
    let documents: Vec<Value> = inputs
        .iter()
        .map(|i| json!({ "source": i.source, "command": i.command, "content": i.doc }))
        .collect();
    let mut csv = String::from("source,command\n");
    for i in &inputs {
        csv.push_str(&format!("{},{}\n", i.source, i.command));
    }
    let json = json!({
        "command": "report",
        "version": VERSION,
        "cumulant_fits": fits,
        "regimes": regimes,
        "tv_bounds": tv,
        "seeds": seeds,
        "quadrature": quadrature,
        "versions": inputs.iter().map(|i| json!({ "source": i.source, "version": field(&i.doc, &["version"]) })).collect::<Vec<_>>(),
        "documents": documents,
    });
    Ok(Output {
        csv,
        json,
        summary: format!("report: merged {} documents", inputs.len()),
    })
}
