//! Scoring, judge analysis, and cross-run comparison reports. All outputs are
//! deterministic functions of the record logs they read.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rcourt_core::evalkit::{aggregate, exact_match, f1, AggregateReport};
use rcourt_core::record::RunRecord;

use crate::runner::{read_records, RunManifest, RECORDS_FILE};
use crate::CliError;

/// Re-scores a run directory from its record log: recomputes EM/F1 for every
/// record from the stored answers, writes `metrics.json` and `metrics.csv`,
/// and returns the aggregate. A stored metric that disagrees with the
/// recomputation is reported (it means the scoring recipe changed).
pub fn cmd_score(run_dir: &Path) -> Result<AggregateReport, CliError> {
    let mut records = read_records(&run_dir.join(RECORDS_FILE))?;
    let mut drift = 0usize;
    for record in &mut records {
        let em = exact_match(&record.final_answer, &record.gold_answers);
        let f1_score = f1(&record.final_answer, &record.gold_answers);
        if em != record.metrics.em || (f1_score - record.metrics.f1).abs() > 1e-9 {
            drift += 1;
        }
        record.metrics.em = em;
        record.metrics.f1 = f1_score;
    }
    if drift > 0 {
        tracing::warn!(
            records = drift,
            "stored metrics disagreed with recomputation; using recomputed values"
        );
    }
    let report = aggregate(&records).map_err(|e| CliError::Runtime(format!("aggregating: {e}")))?;

    let json = serde_json::to_vec_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("serializing metrics: {e}")))?;
    write_file(&run_dir.join("metrics.json"), &json)?;

    let mut csv = String::from("task_id,em,f1,llm_calls,elapsed_ms,error\n");
    for record in &records {
        csv.push_str(&format!(
            "{},{},{:.6},{},{},{}\n",
            csv_field(&record.task_id),
            record.metrics.em,
            record.metrics.f1,
            record.ledger.llm_calls,
            record.ledger.elapsed_ms,
            csv_field(record.error.as_deref().unwrap_or("")),
        ));
    }
    write_file(&run_dir.join("metrics.csv"), csv.as_bytes())?;

    println!(
        "{}: n={} EM={:.1}% F1={:.1}% calls/question={:.2} time/question={:.2}s",
        run_dir.display(),
        report.n,
        100.0 * report.em_mean,
        100.0 * report.f1_mean,
        report.mean_llm_calls,
        report.mean_elapsed_ms / 1000.0,
    );
    Ok(report)
}

/// Judge analysis over a run directory: judged-subset metrics plus the
/// scenario bucket table, written to `analysis.json` / `buckets.csv`.
pub fn cmd_analyze(run_dir: &Path) -> Result<AggregateReport, CliError> {
    let records = read_records(&run_dir.join(RECORDS_FILE))?;
    let report = aggregate(&records).map_err(|e| CliError::Runtime(format!("aggregating: {e}")))?;

    let json = serde_json::to_vec_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("serializing analysis: {e}")))?;
    write_file(&run_dir.join("analysis.json"), &json)?;

    let mut csv = String::from("scenario,total,correct,accuracy_pct\n");
    for row in &report.buckets {
        csv.push_str(&format!(
            "{},{},{},{:.1}\n",
            csv_field(row.bucket.label()),
            row.total,
            row.correct,
            row.accuracy_pct
        ));
    }
    write_file(&run_dir.join("buckets.csv"), csv.as_bytes())?;

    println!(
        "judged subset: {} of {} (EM {:.1}%, F1 {:.1}%)",
        report.judged.n,
        report.n,
        100.0 * report.judged.em_mean,
        100.0 * report.judged.f1_mean
    );
    println!(
        "{:<44} {:>6} {:>8} {:>9}",
        "Scenario", "Total", "Correct", "Accuracy"
    );
    for row in &report.buckets {
        println!(
            "{:<44} {:>6} {:>8} {:>8.1}%",
            row.bucket.label(),
            row.total,
            row.correct,
            row.accuracy_pct
        );
    }
    Ok(report)
}

struct RunSummary {
    strategy: String,
    dataset: String,
    n: usize,
    em_pct: f64,
    f1_pct: f64,
    mean_calls: f64,
    mean_secs: f64,
}

fn summarize(dir: &Path) -> Result<RunSummary, CliError> {
    let manifest = RunManifest::load(dir)?;
    let records = read_records(&dir.join(RECORDS_FILE))?;
    let report = aggregate(&records).map_err(|e| CliError::Runtime(format!("aggregating: {e}")))?;
    Ok(RunSummary {
        strategy: manifest.strategy,
        dataset: manifest.dataset,

        n: report.n,
        em_pct: 100.0 * report.em_mean,
        f1_pct: 100.0 * report.f1_mean,
        mean_calls: report.mean_llm_calls,
        mean_secs: report.mean_elapsed_ms / 1000.0,
    })
}

fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Juxtaposes runs as one comparison table (text + CSV). Runs of the same
/// (strategy, dataset) pool into mean ± spread across seeds. Runs of the
/// k-agent family additionally produce one EM/F1-vs-k series per dataset
/// (CSV + SVG plot).
pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    if run_dirs.is_empty() {
        return Err(CliError::Validation(
            "report requires at least one run directory".into(),
        ));
    }
    let summaries: Vec<RunSummary> = run_dirs
        .iter()
        .map(|dir| summarize(dir))
        .collect::<Result<_, _>>()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", out_dir.display())))?;

    // (dataset, strategy) -> per-run values.
    let mut groups: BTreeMap<(String, String), Vec<&RunSummary>> = BTreeMap::new();
    for summary in &summaries {
        groups
            .entry((summary.dataset.clone(), summary.strategy.clone()))
            .or_default()
            .push(summary);
    }

    let mut table = String::new();
    table.push_str(&format!(
        "{:<18} {:<9} {:>5} {:>4} {:>14} {:>14} {:>8} {:>8}\n",
        "Strategy", "Dataset", "Runs", "n", "EM (%)", "F1 (%)", "Calls", "Time(s)"
    ));
    let mut csv = String::from(
        "dataset,strategy,runs,n,em_mean,em_spread,f1_mean,f1_spread,mean_calls,mean_secs\n",
    );
    for ((dataset, strategy), group) in &groups {
        let (em_mean, em_spread) =
            mean_and_spread(&group.iter().map(|s| s.em_pct).collect::<Vec<_>>());
        let (f1_mean, f1_spread) =
            mean_and_spread(&group.iter().map(|s| s.f1_pct).collect::<Vec<_>>());
        let (calls, _) = mean_and_spread(&group.iter().map(|s| s.mean_calls).collect::<Vec<_>>());
        let (secs, _) = mean_and_spread(&group.iter().map(|s| s.mean_secs).collect::<Vec<_>>());
        let n = group.iter().map(|s| s.n).max().unwrap_or(0);
        table.push_str(&format!(
            "{:<18} {:<9} {:>5} {:>4} {:>8.1} ± {:<4.1} {:>8.1} ± {:<4.1} {:>8.2} {:>8.2}\n",
            strategy,
            dataset,
            group.len(),
            n,
            em_mean,
            em_spread,
            f1_mean,
            f1_spread,
            calls,
            secs
        ));
        csv.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            csv_field(dataset),
            csv_field(strategy),
            group.len(),
            n,
            em_mean,
            em_spread,
            f1_mean,
            f1_spread,
            calls,
            secs
        ));
    }
    write_file(&out_dir.join("report.txt"), table.as_bytes())?;
    write_file(&out_dir.join("report.csv"), csv.as_bytes())?;
    print!("{table}");

    emit_k_series(&groups, out_dir)?;
    Ok(())
}

/// Strategy names of the k-agent family map to their agent count; the
/// two-agent pipeline is k = 2.
fn strategy_k(strategy: &str) -> Option<u32> {
    if strategy == "rc" {
        return Some(2);
    }
    strategy.strip_prefix("rc-")?.parse().ok()
}

fn emit_k_series(
    groups: &BTreeMap<(String, String), Vec<&RunSummary>>,
    out_dir: &Path,
) -> Result<(), CliError> {
    // dataset -> sorted (k, em, f1)
    let mut series: BTreeMap<String, Vec<(u32, f64, f64)>> = BTreeMap::new();
    for ((dataset, strategy), group) in groups {
        let Some(k) = strategy_k(strategy) else {
            continue;
        };
        let (em_mean, _) = mean_and_spread(&group.iter().map(|s| s.em_pct).collect::<Vec<_>>());
        let (f1_mean, _) = mean_and_spread(&group.iter().map(|s| s.f1_pct).collect::<Vec<_>>());
        series
            .entry(dataset.clone())
            .or_default()
            .push((k, em_mean, f1_mean));
    }
    for (dataset, mut points) in series {
        if points.len() < 2 {
            continue;
        }
        points.sort_by_key(|(k, _, _)| *k);
        let mut csv = String::from("k,em_pct,f1_pct\n");
        for (k, em, f1) in &points {
            csv.push_str(&format!("{k},{em:.3},{f1:.3}\n"));
        }
        write_file(
            &out_dir.join(format!("k_series_{dataset}.csv")),
            csv.as_bytes(),
        )?;
        let svg = render_k_series_svg(&dataset, &points);
        write_file(
            &out_dir.join(format!("k_series_{dataset}.svg")),
            svg.as_bytes(),
        )?;
    }
    Ok(())
}

/// Minimal line plot: EM and F1 (%) against the number of agents.
fn render_k_series_svg(dataset: &str, points: &[(u32, f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const ML: f64 = 50.0; // margins
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 40.0;
    let ks: Vec<u32> = points.iter().map(|(k, _, _)| *k).collect();
    let (kmin, kmax) = (*ks.first().unwrap() as f64, *ks.last().unwrap() as f64);
    let x = |k: f64| ML + (k - kmin) / (kmax - kmin).max(1.0) * (W - ML - MR);
    let y = |pct: f64| H - MB - (pct / 100.0) * (H - MT - MB);
    let polyline = |extract: fn(&(u32, f64, f64)) -> f64, color: &str, label: &str| {
        let pts: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.0 as f64), y(extract(p))))
            .collect();
        let markers: String = points
            .iter()
            .map(|p| {
                format!(
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                    x(p.0 as f64),
                    y(extract(p))
                )
            })
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>{markers}<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\" font-size=\"12\">{label}</text>",
            pts.join(" "),
            x(kmax) - 24.0,
            y(extract(points.last().unwrap())) - 8.0,
        )
    };
    let mut gridlines = String::new();
    for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
        gridlines.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"#ddd\"/><text x=\"8\" y=\"{2:.1}\" font-size=\"10\" fill=\"#666\">{pct:.0}%</text>",
            y(pct),
            W - MR,
            y(pct) + 3.0
        ));
    }
    let mut xticks = String::new();
    for k in &ks {
        xticks.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\" text-anchor=\"middle\">{k}</text>",
            x(*k as f64),
            H - MB + 16.0
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\
         <text x=\"{:.1}\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">{dataset}: EM/F1 vs number of agents</text>\
         {gridlines}{xticks}{}{}\
         <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">agents (k)</text>\
         </svg>",
        W / 2.0,
        polyline(|p| p.1, "#1f6fb4", "EM"),
        polyline(|p| p.2, "#d9730d", "F1"),
        W / 2.0,
        H - 8.0,
    )
}

/// Cache maintenance: entry count and size, or full clear.
pub fn cmd_cache_inspect(dir: &Path) -> Result<(u64, u64), CliError> {
    let (entries, bytes) = rcourt_core::gateway::cache_stats(dir)
        .map_err(|e| CliError::Runtime(format!("inspecting {}: {e}", dir.display())))?;
    println!("{}: {entries} entries, {bytes} bytes", dir.display());
    Ok((entries, bytes))
}

pub fn cmd_cache_clear(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("clearing {}: {e}", dir.display())))?;
    }
    println!("cleared {}", dir.display());
    Ok(())
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

/// Records with volatile fields (wall time) zeroed; used to compare reruns.
pub fn strip_volatile(records: &[RunRecord]) -> Vec<RunRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            r.ledger.elapsed_ms = 0;
            r
        })
        .collect()
}
