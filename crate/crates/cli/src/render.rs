//! Plain-text rendering of stored JSON outputs. No recomputation.

use serde_json::Value;

const MAX_INLINE: usize = 8;

pub fn render(name: &str, v: &Value) -> String {
    let mut out = format!("== {name} ==\n");
    if v.get("reports").is_some_and(Value::is_array) {
        invariance(v, &mut out);
    } else if v.get("times").is_some() && v.get("coefficients").is_some() {
        trajectory(v, &mut out);
    } else if v.get("manifest_version").is_some() {
        manifest(v, &mut out);
    } else {
        generic(v, "", &mut out);
    }
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn invariance(v: &Value, out: &mut String) {
    out.push_str(&format!(
        "model {}  verdict {}  tolerance {}  seed {}\n",
        scalar(&v["model"]),
        scalar(&v["verdict"]),
        scalar(&v["tolerance"]),
        scalar(&v["seed"])
    ));
    out.push_str(&format!(
        "{:<28} {:<7} {:>24} {:>24} {:>7} {:>7}\n",
        "condition", "verdict", "max_abs", "mean_abs", "points", "flagged"
    ));
    for r in v["reports"].as_array().into_iter().flatten() {
        report_row(r, out);
    }
    if let Some(extra) = v.get("supplementary").and_then(Value::as_array).filter(|e| !e.is_empty()) {
        out.push_str("supplementary (not part of the verdict)\n");
        for r in extra {
            report_row(r, out);
        }
    }
}

fn report_row(r: &Value, out: &mut String) {
    let flagged = r.get("flagged").and_then(Value::as_array).map_or(0, Vec::len);
    out.push_str(&format!(
        "{:<28} {:<7} {:>24} {:>24} {:>7} {:>7}\n",
        scalar(&r["condition"]),
        scalar(&r["verdict"]),
        scalar(&r["max_abs"]),
        scalar(&r["mean_abs"]),
        scalar(&r["n_points"]),
        flagged
    ));
}

fn trajectory(v: &Value, out: &mut String) {
    let times = v["times"].as_array().map_or(&[][..], Vec::as_slice);
    out.push_str(&format!(
        "SPDE trajectory: d={} K={} regularity {} seed {}\n",
        scalar(&v["dimension"]),
        scalar(&v["max_degree"]),
        scalar(&v["regularity"]),
        scalar(&v["seed"])
    ));
    if let (Some(first), Some(last)) = (times.first(), times.last()) {
        out.push_str(&format!("{} states, t from {} to {}\n", times.len(), first, last));
    }
    if let Some(shifts) = v.get("shifts").and_then(Value::as_array) {
        if let Some(last) = shifts.last() {
            out.push_str(&format!("final shift {last}\n"));
        }
    }
}

fn manifest(v: &Value, out: &mut String) {
    out.push_str(&format!("subcommand {}  seed {}\n", scalar(&v["subcommand"]), scalar(&v["seed"])));
    if let Some(argv) = v["argv"].as_array() {
        let args: Vec<String> = argv.iter().map(scalar).collect();
        out.push_str(&format!("argv: {}\n", args.join(" ")));
    }
    if let Some(vs) = v["versions"].as_object() {
        for (k, ver) in vs {
            out.push_str(&format!("version {k} {}\n", scalar(ver)));
        }
    }
    if let Some(outputs) = v["outputs"].as_array() {
        out.push_str(&format!("{} outputs\n", outputs.len()));
    }
}

fn generic(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                generic(child, &key, out);
            }
        }
        Value::Array(items) if items.len() > MAX_INLINE || items.iter().any(|x| x.is_object() || x.is_array()) => {
            if items.iter().all(Value::is_object) && items.len() <= MAX_INLINE {
                for (i, item) in items.iter().enumerate() {
                    generic(item, &format!("{prefix}[{i}]"), out);
                }
            } else {
                out.push_str(&format!("{prefix}: [{} entries]\n", items.len()));
            }
        }
        other => out.push_str(&format!("{prefix}: {}\n", compact(other))),
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::Array(items) => format!("[{}]", items.iter().map(scalar).collect::<Vec<_>>().join(", ")),
        other => scalar(other),
    }
}
