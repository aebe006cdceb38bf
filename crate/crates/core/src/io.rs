//! Result persistence: point-set files, metric CSVs, run directories and
//! plot-ready curves.
//!
//! A run directory looks like
//!
//! ```text
//! <run>/manifest.conf
//! <run>/seed_<k>/metrics.csv
//! <run>/seed_<k>/fronts/<timestep>.points
//! <run>/aggregate/metrics.csv
//! ```
//!
//! Data files hold no timestamps, so identical runs produce identical bytes.
//! Reals are written in shortest round-trip form, which never loses precision.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::to_config_text;
use crate::error::{MorlError, Result};
use crate::pareto::ObjectiveVector;
use crate::sweep::{AggregatePoint, MetricPoint, SweepResult};

/// First line of every metrics CSV.
pub const METRICS_VERSION_LINE: &str = "# morl-metrics v1";
pub const METRICS_HEADER: [&str; 8] = [
    "timestep",
    "algorithm",
    "environment",
    "seed",
    "hypervolume",
    "sparsity",
    "cardinality",
    "igd",
];

pub fn parse_points(text: &str, origin: &Path) -> Result<Vec<ObjectiveVector>> {
    let mut points: Vec<ObjectiveVector> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| MorlError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let values = content
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| err(format!("`{}` is not a number", t.trim()))))
            .collect::<Result<Vec<f64>>>()?;
        let point = ObjectiveVector::new(values).map_err(|e| err(e.to_string()))?;
        if let Some(first) = points.first() {
            if first.dim() != point.dim() {
                return Err(err(format!(
                    "expected {} values, found {}",
                    first.dim(),
                    point.dim()
                )));
            }
        }
        points.push(point);
    }
    Ok(points)
}

pub fn read_points(path: &Path) -> Result<Vec<ObjectiveVector>> {
    let text = fs::read_to_string(path).map_err(|e| MorlError::io(path, e))?;
    parse_points(&text, path)
}

pub fn format_points(points: &[ObjectiveVector]) -> String {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_points(path: &Path, points: &[ObjectiveVector]) -> Result<()> {
    write_file(path, format_points(points).as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| MorlError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| MorlError::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>, header: &[&str]) -> Result<Vec<u8>> {
    let mut buf = format!("{METRICS_VERSION_LINE}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| MorlError::io("<buffer>", e))?;
    }
    Ok(buf)
}

pub fn metrics_csv(algorithm: &str, environment: &str, seed: u64, timeline: &[MetricPoint]) -> Result<Vec<u8>> {
    let rows = timeline.iter().map(|p| {
        vec![
            p.timestep.to_string(),
            algorithm.to_string(),
            environment.to_string(),
            seed.to_string(),
            p.hypervolume.to_string(),
            p.sparsity.to_string(),
            p.cardinality.to_string(),
            opt(p.igd),
        ]
    });
    csv_bytes(rows, &METRICS_HEADER)
}

/// One `mean` and one `sd` row per checkpoint.
pub fn aggregate_csv(algorithm: &str, environment: &str, aggregate: &[AggregatePoint]) -> Result<Vec<u8>> {
    let mut rows = Vec::with_capacity(2 * aggregate.len());
    for p in aggregate {
        for (label, pick) in [("mean", true), ("sd", false)] {
            let f = |s: crate::sweep::Stat| if pick { s.mean } else { s.sd };
            rows.push(vec![
                p.timestep.to_string(),
                algorithm.to_string(),
                environment.to_string(),
                label.to_string(),
                f(p.hypervolume).to_string(),
                f(p.sparsity).to_string(),
                f(p.cardinality).to_string(),
                opt(p.igd.map(f)),
            ]);
        }
    }
    csv_bytes(rows, &METRICS_HEADER)
}

/// One row of a metrics CSV, with the seed column kept as text.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub timestep: usize,
    pub algorithm: String,
    pub environment: String,
    pub seed: String,
    pub hypervolume: f64,
    pub sparsity: f64,
    pub cardinality: f64,
    pub igd: Option<f64>,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let file = fs::File::open(path).map_err(|e| MorlError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(MorlError::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: "unexpected metrics header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 3, |p| p.line() as usize);
        let err = |message: String| MorlError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| err(format!("bad {} `{}`", METRICS_HEADER[k], &rec[k])))
        };
        rows.push(MetricRow {
            timestep: rec[0].parse().map_err(|_| err(format!("bad timestep `{}`", &rec[0])))?,
            algorithm: rec[1].to_string(),
            environment: rec[2].to_string(),
            seed: rec[3].to_string(),
            hypervolume: num(4)?,
            sparsity: num(5)?,
            cardinality: num(6)?,
            igd: if rec[7].is_empty() { None } else { Some(num(7)?) },
        });
    }
    Ok(rows)
}

pub const MANIFEST_FILE: &str = "manifest.conf";

/// Resolved configuration plus version and creation time, as comments.
pub fn manifest_text(result: &SweepResult) -> String {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "# morl {} run manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# created {created} (seconds since the Unix epoch)");
    let _ = writeln!(out, "# replay with: morl sweep --config {MANIFEST_FILE}");
    out.push_str(&to_config_text(&result.config));
    out
}

/// Writes every seed's metrics and fronts, the aggregate and the manifest
/// under `dir`.
pub fn write_run(dir: &Path, result: &SweepResult) -> Result<()> {
    let algo = result.config.algorithm.token();
    let env = result.config.env.token();
    for run in &result.per_seed {
        let seed_dir = dir.join(format!("seed_{}", run.seed));
        write_file(&seed_dir.join("metrics.csv"), &metrics_csv(&algo, env, run.seed, &run.metrics)?)?;
        for (t, front) in &run.fronts {
            write_points(&seed_dir.join("fronts").join(format!("{t}.points")), front.points())?;
        }
    }
    write_file(
        &dir.join("aggregate").join("metrics.csv"),
        &aggregate_csv(&algo, env, &result.aggregate)?,
    )?;
    write_file(&dir.join(MANIFEST_FILE), manifest_text(result).as_bytes())
}

/// Files written by [`emit_plot_data`].
#[derive(Clone, Debug, Default)]
pub struct PlotFiles {
    pub curves: Vec<PathBuf>,
    pub front: Option<PathBuf>,
}

/// Turns a run directory into `timestep,mean,sd` curves per indicator and
/// the final front of the first seed, all written to `out`.
///
/// `igd_curve.csv` is only written when the run recorded IGD.
pub fn emit_plot_data(run_dir: &Path, out: &Path) -> Result<PlotFiles> {
    if !run_dir.is_dir() {
        return Err(MorlError::Config(format!("{} is not a run directory", run_dir.display())));
    }
    let rows = read_metrics(&run_dir.join("aggregate").join("metrics.csv"))?;
    let mut files = PlotFiles::default();
    type Pick = fn(&MetricRow) -> Option<f64>;
    let curves: [(&str, Pick); 4] = [
        ("hypervolume", |r| Some(r.hypervolume)),
        ("cardinality", |r| Some(r.cardinality)),
        ("sparsity", |r| Some(r.sparsity)),
        ("igd", |r| r.igd),
    ];
    for (name, pick) in curves {
        let means = rows.iter().filter(|r| r.seed == "mean");
        let sds = rows.iter().filter(|r| r.seed == "sd");
        let mut text = String::from("timestep,mean,sd\n");
        let mut any = false;
        for (m, s) in means.zip(sds) {
            if let (Some(mv), Some(sv)) = (pick(m), pick(s)) {
                any = true;
                let _ = writeln!(text, "{},{},{}", m.timestep, mv, sv);
            }
        }
        if !any && name == "igd" {
            continue;
        }
        let path = out.join(format!("{name}_curve.csv"));
        write_file(&path, text.as_bytes())?;
        files.curves.push(path);
    }
    if let Some(front) = final_front_file(run_dir)? {
        let path = out.join("front_final.points");
        write_points(&path, &read_points(&front)?)?;
        files.front = Some(path);
    }
    Ok(files)
}

/// Latest front file of the lowest-numbered seed directory.
fn final_front_file(run_dir: &Path) -> Result<Option<PathBuf>> {
    let numbered = |dir: &Path, prefix: &str, suffix: &str| -> Result<Vec<(u64, PathBuf)>> {
        let mut found = Vec::new();
        let entries = fs::read_dir(dir).map_err(|e| MorlError::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| MorlError::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(n) = name
                .strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(suffix))
                .and_then(|n| n.parse::<u64>().ok())
            {
                found.push((n, entry.path()));
            }
        }
        found.sort();
        Ok(found)
    };
    let Some((_, seed_dir)) = numbered(run_dir, "seed_", "")?.into_iter().next() else {
        return Ok(None);
    };
    let fronts = seed_dir.join("fronts");
    if !fronts.is_dir() {
        return Ok(None);
    }
    Ok(numbered(&fronts, "", ".points")?.pop().map(|(_, p)| p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let pts = vec![ObjectiveVector::from([1.0, -1.0]), ObjectiveVector::from([18.6117347768279, -8.649148282327])];
        let text = format_points(&pts);
        assert_eq!(parse_points(&text, Path::new("x")).unwrap(), pts);
    }

    #[test]
    fn points_comments_and_errors() {
        let pts = parse_points("# front\n1, 2\n\n3,4 # tail\n", Path::new("f")).unwrap();
        assert_eq!(pts.len(), 2);
        let err = parse_points("1,2\n3,x\n", Path::new("f")).unwrap_err();
        assert!(matches!(err, MorlError::Parse { line: 2, .. }), "{err}");
        let err = parse_points("1,2\n3\n", Path::new("f")).unwrap_err();
        assert!(matches!(err, MorlError::Parse { line: 2, .. }), "{err}");
        assert!(parse_points("", Path::new("f")).unwrap().is_empty());
    }

    #[test]
    fn metrics_csv_layout() {
        let tl = [MetricPoint {
            timestep: 1000,
            hypervolume: 777.26,
            sparsity: 0.0,
            cardinality: 2,
            igd: None,
        }];
        let text = String::from_utf8(metrics_csv("pql", "dst-concave", 42, &tl).unwrap()).unwrap();
        assert_eq!(
            text,
            "# morl-metrics v1\ntimestep,algorithm,environment,seed,hypervolume,sparsity,cardinality,igd\n1000,pql,dst-concave,42,777.26,0,2,\n"
        );
    }
}
