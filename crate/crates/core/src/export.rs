//! CSV traces, JSON summaries and SVG regret plots.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{mean_and_sd, ExperimentOutput, LabeledTrace, OutputFormat, RunSummary};

pub const CSV_HEADER: [&str; 4] = ["experiment", "rep", "round", "cum_regret"];

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv>".into(),
            source: io,
        },
        other => Error::Parse {
            what: "trace CSV".into(),
            message: format!("{other:?}"),
        },
    }
}

/// One row per round with 1-based `round`; floats use the shortest
/// representation that parses back to the same value.
pub fn write_traces_csv<W: Write>(traces: &[LabeledTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for lt in traces {
        let rep = lt.rep.to_string();
        for (t, value) in lt.trace.cumulative.iter().enumerate() {
            w.write_record([
                lt.experiment.as_str(),
                &rep,
                &(t + 1).to_string(),
                &value.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

/// A cumulative-regret trace read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub experiment: String,
    pub rep: usize,
    pub cumulative: Vec<f64>,
}

/// Reads rows written by [`write_traces_csv`]; rounds of each trace must run
/// `1, 2, ...` on consecutive rows.
pub fn read_traces_csv<R: Read>(reader: R) -> Result<Vec<ParsedTrace>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        what: "trace CSV".into(),
        message: format!("line {line}: {message}"),
    };
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let mut out: Vec<ParsedTrace> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(csv_error)?;
        if record.len() != 4 {
            return Err(parse_err(line, format!("{} fields", record.len())));
        }
        let rep: usize = record[1]
            .parse()
            .map_err(|e| parse_err(line, format!("rep: {e}")))?;
        let round: usize = record[2]
            .parse()
            .map_err(|e| parse_err(line, format!("round: {e}")))?;
        let value: f64 = record[3]
            .parse()
            .map_err(|e| parse_err(line, format!("cum_regret: {e}")))?;
        let continues = matches!(out.last(), Some(last) if last.experiment == record[0] && last.rep == rep);
        if !continues {
            out.push(ParsedTrace {
                experiment: record[0].to_string(),
                rep,
                cumulative: Vec::new(),
            });
        }
        let current = out.last_mut().expect("pushed above");
        if round != current.cumulative.len() + 1 {
            return Err(parse_err(line, format!("round {round} out of sequence")));
        }
        current.cumulative.push(value);
    }
    Ok(out)
}

/// Final regrets grouped by experiment, in order of first appearance.
pub fn finals_by_experiment(traces: &[ParsedTrace]) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for tr in traces {
        let last = tr.cumulative.last().copied().unwrap_or(0.0);
        match out.iter_mut().find(|(name, _)| *name == tr.experiment) {
            Some((_, finals)) => finals.push(last),
            None => out.push((tr.experiment.clone(), vec![last])),
        }
    }
    out
}

pub fn write_summary_json<W: Write>(summaries: &[RunSummary], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, summaries).map_err(|e| Error::Parse {
        what: "summary JSON".into(),
        message: e.to_string(),
    })
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 1000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Curve {
    name: String,
    rounds: Vec<usize>,
    mean: Vec<f64>,
    half: Vec<f64>,
    bound: Option<f64>,
}

fn curves(output: &ExperimentOutput) -> Vec<Curve> {
    output
        .summaries
        .iter()
        .map(|s| {
            let traces: Vec<&LabeledTrace> = output
                .traces
                .iter()
                .filter(|t| t.experiment == s.experiment)
                .collect();
            let len = traces.iter().map(|t| t.trace.len()).min().unwrap_or(0);
            let stride = len.div_ceil(MAX_POINTS).max(1);
            let mut rounds: Vec<usize> = (0..len).step_by(stride).collect();
            if len > 0 && rounds.last() != Some(&(len - 1)) {
                rounds.push(len - 1);
            }
            let (mut mean, mut half) = (Vec::new(), Vec::new());
            for &t in &rounds {
                let column: Vec<f64> = traces.iter().map(|tr| tr.trace.cumulative[t]).collect();
                let (m, sd) = mean_and_sd(&column);
                mean.push(m);
                half.push(1.96 * sd / (column.len() as f64).sqrt());
            }
            Curve {
                name: s.experiment.clone(),
                rounds,
                mean,
                half,
                bound: s.bound,
            }
        })
        .collect()
}

/// Mean cumulative regret per experiment with a 95% band and, where
/// defined, the regret bound as a dashed line.
pub fn write_svg<W: Write>(output: &ExperimentOutput, mut writer: W) -> Result<()> {
    let curves = curves(output);
    let horizon = curves
        .iter()
        .filter_map(|c| c.rounds.last())
        .max()
        .map_or(1, |&t| t + 1);
    let mut y_max = 0.0f64;
    let mut y_min = 0.0f64;
    for c in &curves {
        for (m, h) in c.mean.iter().zip(&c.half) {
            y_max = y_max.max(m + h);
            y_min = y_min.min(m - h);
        }
        if let Some(b) = c.bound {
            y_max = y_max.max(b);
        }
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let sx = |t: usize| MARGIN + (t + 1) as f64 / horizon as f64 * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    svg.push_str(&format!(
        "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" stroke=\"black\" fill=\"none\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">round</text>\n",
        WIDTH / 2.0,
        HEIGHT - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\" font-size=\"14\">cumulative regret</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\" font-size=\"11\">1</text>\n<text x=\"{x1}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{horizon}</text>\n",
        y0 + 15.0,
        y0 + 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{y1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
        x0 - 5.0,
        fmt_tick(y_max),
        x0 - 5.0,
        sy(0.0),
        0
    ));
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if c.rounds.is_empty() {
            continue;
        }
        let mut band = String::new();
        for (k, &t) in c.rounds.iter().enumerate() {
            band.push_str(&format!(
                "{}{:.2},{:.2} ",
                if k == 0 { 'M' } else { 'L' },
                sx(t),
                sy(c.mean[k] + c.half[k])
            ));
        }
        for (k, &t) in c.rounds.iter().enumerate().rev() {
            band.push_str(&format!("L{:.2},{:.2} ", sx(t), sy(c.mean[k] - c.half[k])));
        }
        svg.push_str(&format!(
            "<path d=\"{band}Z\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
        ));
        let line: Vec<String> = c
            .rounds
            .iter()
            .zip(&c.mean)
            .map(|(&t, &m)| format!("{:.2},{:.2}", sx(t), sy(m)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            line.join(" ")
        ));
        if let Some(b) = c.bound {
            svg.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-dasharray=\"6 4\"/>\n",
                y = sy(b)
            ));
        }
        let legend_y = MARGIN + 16.0 * i as f64;
        let bound_note = c
            .bound
            .map_or(String::new(), |b| format!(" (bound {})", fmt_tick(b)));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"12\" fill=\"{color}\">{}{bound_note}</text>\n",
            x0 + 10.0,
            escape(&c.name)
        ));
    }
    svg.push_str("</svg>\n");
    writer.write_all(svg.as_bytes()).map_err(|e| Error::Io {
        path: "<svg>".into(),
        source: e,
    })
}

fn fmt_tick(y: f64) -> String {
    if y.abs() >= 100.0 {
        format!("{y:.0}")
    } else {
        format!("{y:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `output` to `path` in the requested format.
pub fn write_output(output: &ExperimentOutput, path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        OutputFormat::Csv => write_traces_csv(&output.traces, &mut w),
        OutputFormat::Json => write_summary_json(&output.summaries, &mut w),
        OutputFormat::Svg => write_svg(output, &mut w),
    };
    let relabel = |e: Error| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    };
    result.map_err(relabel)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regret::{RegretKind, RegretTrace};

    fn trace(name: &str, rep: usize, values: &[f64]) -> LabeledTrace {
        LabeledTrace {
            experiment: name.into(),
            rep,
            trace: RegretTrace {
                kind: RegretKind::Pseudo,
                cumulative: values.to_vec(),
            },
        }
    }

    #[test]
    fn empty_list_gives_header_only() {
        let mut buf = Vec::new();
        write_traces_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,rep,round,cum_regret\n"
        );
    }

    #[test]
    fn one_rep_three_rounds() {
        let mut buf = Vec::new();
        write_traces_csv(&[trace("mab", 0, &[0.0, 0.3, 0.6])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(3).unwrap(), "mab,0,3,0.6");
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        let traces = vec![
            trace("a", 0, &[0.1, 0.30000000000000004, 1.0 / 3.0]),
            trace("a", 1, &[0.0, 2.5e-17, 7.123456789012345]),
            trace("b", 0, &[1e300, -0.0, f64::MIN_POSITIVE]),
        ];
        let mut buf = Vec::new();
        write_traces_csv(&traces, &mut buf).unwrap();
        let parsed = read_traces_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), 3);
        for (p, t) in parsed.iter().zip(&traces) {
            assert_eq!(p.cumulative, t.trace.cumulative);
        }
        let grouped = finals_by_experiment(&parsed);
        let direct = RunSummary::from_finals("a", 3, 1, vec![1.0 / 3.0, 7.123456789012345]);
        let back = RunSummary::from_finals("a", 3, 1, grouped[0].1.clone());
        assert_eq!(direct, back);
    }

    #[test]
    fn malformed_csv_is_parse_error() {
        let bad = "experiment,rep,round,cum_regret\nmab,0,2,0.5\n";
        assert!(matches!(
            read_traces_csv(bad.as_bytes()),
            Err(Error::Parse { .. })
        ));
        let bad = "x,y\n";
        assert!(matches!(
            read_traces_csv(bad.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn svg_has_band_line_and_bound() {
        let mut s = RunSummary::from_finals("mab", 3, 2, vec![0.6, 0.9]);
        s.bound = Some(5.0);
        let output = ExperimentOutput {
            summaries: vec![s],
            traces: vec![
                trace("mab", 0, &[0.0, 0.3, 0.6]),
                trace("mab", 1, &[0.3, 0.6, 0.9]),
            ],
        };
        let mut buf = Vec::new();
        write_svg(&output, &mut buf).unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("fill-opacity"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn unwritable_path_is_io() {
        let output = ExperimentOutput {
            summaries: vec![],
            traces: vec![],
        };
        let err =
            write_output(&output, Path::new("/nonexistent/dir/out.csv"), OutputFormat::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
