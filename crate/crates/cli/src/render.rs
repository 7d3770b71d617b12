//! Plain-text rendering of reports and frame residuals.

use std::fmt::Write;

use serde_json::Value;

use edcnn::frames::LayerResidual;

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x:.0}"),
        Some(x) => format!("{x:.3e}"),
        None => "-".into(),
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Human-readable summary of a `report.json` value.
pub fn report_table(report: &Value) -> Result<String, String> {
    let analyses = report["analyses"]
        .as_array()
        .ok_or_else(|| "not a report: missing `analyses` array".to_string())?;
    let mut out = String::new();
    let tk = &report["toolkit"];
    let net = &report["network"];
    let _ = writeln!(
        out,
        "{} {}  seed {}",
        tk["name"].as_str().unwrap_or("?"),
        tk["version"].as_str().unwrap_or("?"),
        report["config"]["seed"]
    );
    let _ = writeln!(
        out,
        "dims {}  skip dims {}  feature dim {}  N_rep {}  mask bits {}",
        net["dims"], net["skip_dims"], net["feature_dim"], net["nrep_bound"], net["mask_bits"]
    );
    if let Some(w) = net["warnings"].as_array() {
        for warning in w {
            let _ = writeln!(out, "warning: {}", warning.as_str().unwrap_or_default());
        }
    }
    for block in analyses {
        let status = if block["passed"].as_bool() == Some(true) {
            "PASS"
        } else {
            "FAIL"
        };
        let enforced = if block["enforced"].as_bool() == Some(true) {
            " (enforced)"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "\n[{status}] {}{enforced}",
            block["name"].as_str().unwrap_or("?")
        );
        if let Some(err) = block["error"].as_str() {
            let _ = writeln!(out, "  error: {err}");
        }
        let mut rows = vec![vec![
            "  check".into(),
            "status".into(),
            "value".into(),
            "limit".into(),
            "note".into(),
        ]];
        for c in block["checks"].as_array().into_iter().flatten() {
            rows.push(vec![
                format!("  {}", c["name"].as_str().unwrap_or("?")),
                if c["passed"].as_bool() == Some(true) {
                    "ok"
                } else {
                    "FAILED"
                }
                .into(),
                num(&c["value"]),
                num(&c["limit"]),
                c["note"].as_str().unwrap_or("").into(),
            ]);
        }
        out.push_str(&table(&rows));
    }
    let overall = if report["passed"].as_bool() == Some(true) {
        "passed"
    } else {
        "failed"
    };
    let _ = writeln!(out, "\nenforced checks {overall}");
    Ok(out)
}

pub fn residual_table(layers: &[LayerResidual]) -> String {
    let mut rows = vec![vec![
        "layer".to_string(),
        "alpha".into(),
        "pooling".into(),
        "filter".into(),
        "layer_identity".into(),
    ]];
    for r in layers {
        rows.push(vec![
            r.layer.to_string(),
            format!("{:.6}", r.alpha),
            format!("{:.3e}", r.pooling_residual),
            format!("{:.3e}", r.filter_residual),
            format!("{:.3e}", r.layer_identity_residual),
        ]);
    }
    table(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn renders_checks() {
        let report = json!({
            "toolkit": {"name": "edcnn", "version": "0.1.0"},
            "config": {"seed": 3},
            "network": {"dims": [4, 8], "skip_dims": [], "feature_dim": 8, "nrep_bound": "1", "mask_bits": 12, "warnings": []},
            "analyses": [{"name": "frames", "enforced": true, "passed": false,
                "checks": [{"name": "perfect_reconstruction", "passed": false, "value": 0.5, "limit": 1e-10}]}],
            "passed": false
        });
        let text = report_table(&report).unwrap();
        assert!(text.contains("[FAIL] frames (enforced)"), "{text}");
        assert!(
            text.contains("perfect_reconstruction  FAILED  5.000e-1  1.000e-10"),
            "{text}"
        );
        assert!(text.ends_with("enforced checks failed\n"));
        assert!(report_table(&json!({})).is_err());
    }
}
