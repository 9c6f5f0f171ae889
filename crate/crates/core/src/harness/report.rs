use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ablate::AblationTable;
use super::eval::EvalReport;
use crate::error::{Error, Result};
use crate::metrics::SplitResult;

pub const SUMMARY_FILE: &str = "summary.md";
pub const SPLITS_CHART_FILE: &str = "splits.svg";

#[derive(Deserialize)]
#[serde(untagged)]
enum ResultFile {
    Ablation(AblationTable),
    Eval(EvalReport),
    Many(Vec<SplitResult>),
    One(SplitResult),
}

/// Split results tagged with the file they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcedResult {
    pub source: String,
    pub result: SplitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub splits: Vec<SourcedResult>,
    pub mean: Option<SplitResult>,
    pub ablations: Vec<(String, AblationTable)>,
    pub markdown: String,
    pub written: Vec<PathBuf>,
}

/// Reads every `*.json` in `dir` (in name order) that holds split results,
/// evaluation reports or ablation tables. Other JSON files are skipped.
pub fn collect_results(dir: &Path) -> Result<(Vec<SourcedResult>, Vec<(String, AblationTable)>)> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut splits = Vec::new();
    let mut ablations = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let Ok(file) = serde_json::from_str::<ResultFile>(&text) else {
            continue;
        };
        let source = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let tag = |result| SourcedResult {
            source: source.clone(),
            result,
        };
        match file {
            ResultFile::Ablation(t) => ablations.push((source.clone(), t)),
            ResultFile::Eval(r) => splits.extend(r.splits.into_iter().map(tag)),
            ResultFile::Many(v) => splits.extend(v.into_iter().map(tag)),
            ResultFile::One(r) => splits.push(tag(r)),
        }
    }
    Ok((splits, ablations))
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn split_table(out: &mut String, splits: &[SourcedResult], mean: &SplitResult) {
    // DOS columns appear only when every row has them.
    let with_dos = mean.dos.is_some();
    let mut header = vec!["source", "split", "SRCC", "PLCC", "RMSE"];
    if with_dos {
        header.extend(["JSD", "EMD", "DOS RMSE", "Intersection", "Cosine"]);
    }
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    let row = |out: &mut String, source: &str, r: &SplitResult| {
        let mut cells = vec![
            source.to_string(),
            r.split_id.clone(),
            f4(r.mos.srcc),
            f4(r.mos.plcc),
            f4(r.mos.rmse),
        ];
        if let (true, Some(d)) = (with_dos, r.dos) {
            cells.extend([d.jsd, d.emd, d.rmse, d.intersection, d.cosine].map(f4));
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    };
    for s in splits {
        row(out, &s.source, &s.result);
    }
    row(out, "", mean);
}

fn ablation_table(out: &mut String, name: &str, t: &AblationTable) {
    let _ = writeln!(out, "\n## Ablation `{name}` ({})\n", t.axis);
    let flag_names: Vec<String> = t
        .rows
        .first()
        .map(|r| r.flags.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = vec!["variant".into()];
    header.extend(flag_names.iter().cloned());
    header.extend(["train SRCC", "test SRCC", "test PLCC", "status"].map(String::from));
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in &t.rows {
        let mut cells = vec![r.variant.clone()];
        cells.extend(flag_names.iter().map(|f| r.flags.get(f).cloned().unwrap_or_default()));
        cells.push(r.train.map(|m| f4(m.srcc)).unwrap_or_else(|| "-".into()));
        cells.push(r.test.as_ref().map(|m| f4(m.mos.srcc)).unwrap_or_else(|| "-".into()));
        cells.push(r.test.as_ref().map(|m| f4(m.mos.plcc)).unwrap_or_else(|| "-".into()));
        cells.push(match &r.error {
            Some(e) => format!("failed: {}", e.replace('|', "/")),
            None => "ok".into(),
        });
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped vertical bars, one group per category.
pub fn bar_chart_svg(title: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    const COLOURS: [&str; 4] = ["#4472c4", "#ed7d31", "#70ad47", "#7f7f7f"];
    let (w, h, left, bottom, top) = (80.0 + 70.0 * categories.len() as f64, 320.0, 50.0, 80.0, 40.0);
    let values = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = values.fold((0.0f64, 1.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let plot_h = h - bottom - top;
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for tick in 0..=4 {
        let v = lo + (hi - lo) * tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y0:.2}" y2="{y0:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            w - 10.0,
            left - 4.0,
            y(v) + 4.0,
            y0 = y(v)
        );
    }
    let group = 70.0;
    let bar = (group - 14.0) / series.len().max(1) as f64;
    for (ci, cat) in categories.iter().enumerate() {
        let gx = left + 10.0 + group * ci as f64;
        for (si, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(ci).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (y0, y1) = (y(v.max(0.0)), y(v.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y0:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar * si as f64,
                (y1 - y0).max(0.5),
                COLOURS[si % COLOURS.len()]
            );
        }
        let lx = gx + (group - 14.0) / 2.0;
        let ly = h - bottom + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-35 {lx:.2} {ly:.2})">{}</text>"#,
            escape(cat)
        );
    }
    for (si, (name, _)) in series.iter().enumerate() {
        let lx = left + 110.0 * si as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            h - 14.0,
            COLOURS[si % COLOURS.len()],
            lx + 14.0,
            h - 5.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `summary.md` plus one SVG chart per table into `out_dir`.
pub fn cmd_report(results_dir: &Path, out_dir: &Path) -> Result<Report> {
    let (splits, ablations) = collect_results(results_dir)?;
    if splits.is_empty() && ablations.is_empty() {
        return Err(Error::NoResults(results_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut md = String::from("# Results\n");
    let mut written = Vec::new();
    let plain: Vec<SplitResult> = splits.iter().map(|s| s.result.clone()).collect();
    let mean = SplitResult::mean(&plain, "mean");
    if let Some(mean) = &mean {
        let _ = writeln!(md, "\n## Splits\n");
        split_table(&mut md, &splits, mean);
        let cats: Vec<String> = splits.iter().map(|s| format!("{}/{}", s.source, s.result.split_id)).collect();
        let svg = bar_chart_svg(
            "Per-split correlation",
            &cats,
            &[
                ("SRCC", plain.iter().map(|r| r.mos.srcc).collect()),
                ("PLCC", plain.iter().map(|r| r.mos.plcc).collect()),
            ],
        );
        let path = out_dir.join(SPLITS_CHART_FILE);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    for (name, table) in &ablations {
        ablation_table(&mut md, name, table);
        let cats: Vec<String> = table.rows.iter().map(|r| r.variant.clone()).collect();
        let svg = bar_chart_svg(
            &format!("{} ablation", table.axis),
            &cats,
            &[
                ("train SRCC", table.rows.iter().map(|r| r.train.map_or(f64::NAN, |m| m.srcc)).collect()),
                (
                    "test SRCC",
                    table.rows.iter().map(|r| r.test.as_ref().map_or(f64::NAN, |m| m.mos.srcc)).collect(),
                ),
            ],
        );
        let path = out_dir.join(format!("ablation_{name}.svg"));
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, &md).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(Report {
        splits,
        mean,
        ablations,
        markdown: md,
        written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{DosEvalReport, MosSummary};

    fn result(id: &str, srcc: f64, dos: bool) -> SplitResult {
        SplitResult {
            split_id: id.into(),
            mos: MosSummary { srcc, plcc: srcc / 2.0, rmse: 1.0 - srcc },
            dos: dos.then_some(DosEvalReport { jsd: 0.1, emd: 0.2, rmse: 0.3, intersection: 0.8, cosine: 0.9 }),
        }
    }

    #[test]
    fn empty_dir_is_no_results() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("notes.json"), "{\"x\":1}").unwrap();
        assert!(matches!(cmd_report(dir.path(), dir.path()), Err(Error::NoResults(_))));
    }

    #[test]
    fn single_and_mixed() {
        let dir = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), serde_json::to_string(&result("split-0", 0.8, true)).unwrap()).unwrap();
        let r = cmd_report(dir.path(), out.path()).unwrap();
        assert_eq!(r.splits.len(), 1);
        assert!(r.markdown.contains("JSD"));
        fs::write(dir.path().join("b.json"), serde_json::to_string(&vec![result("split-1", 0.6, false)]).unwrap()).unwrap();
        let r = cmd_report(dir.path(), out.path()).unwrap();
        assert_eq!(r.splits.len(), 2);
        assert!(!r.markdown.contains("JSD"));
        assert!(r.mean.unwrap().dos.is_none());
        let again = cmd_report(dir.path(), out.path()).unwrap();
        assert_eq!(again.markdown, r.markdown);
    }
}
