//! JSON and CSV output. Every float is written with 17 significant digits so
//! that parsing the text gives back the same bits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use metastab::simulate::{TraceEntry, TraceJumpLog};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::CliError;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty printer that writes floats as `d.dddddddddddddddde±x`.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

/// Builds a CSV document from a header and rows of already formatted cells.
pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub const JUMPS_HEADER: [&str; 6] = ["run", "entry_index", "valley", "holding_rescaled", "raw_holding_rescaled", "censored"];

pub fn jumps_csv(logs: &[TraceJumpLog]) -> String {
    let header: Vec<String> = JUMPS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = logs.iter().flat_map(|l| {
        l.entries.iter().enumerate().map(move |(k, e)| {
            vec![
                l.run.to_string(),
                k.to_string(),
                e.valley.to_string(),
                fmt_f64(e.holding),
                fmt_f64(e.raw_holding),
                (e.censored as u8).to_string(),
            ]
        })
    });
    csv(&header, rows)
}

/// Per-run fields of a trace log that do not fit the CSV.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunMeta {
    pub run: u64,
    pub delta_time: f64,
    pub total_time: f64,
    pub steps: u64,
    pub first_transition_raw: Option<f64>,
    /// The step budget ran out.
    pub censored: bool,
}

impl RunMeta {
    pub fn of(l: &TraceJumpLog) -> Self {
        Self {
            run: l.run,
            delta_time: l.delta_time,
            total_time: l.total_time,
            steps: l.steps,
            first_transition_raw: l.first_transition_raw,
            censored: l.censored,
        }
    }
}

/// Parses a jumps CSV back into logs. Run-level fields come from `meta`
/// when given and are zero otherwise.
pub fn parse_jumps(text: &str, theta: f64, dt: f64, meta: &[RunMeta]) -> Result<Vec<TraceJumpLog>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty jumps file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(run_c), Some(idx_c), Some(val_c), Some(hold_c)) =
        (col("run"), col("entry_index"), col("valley"), col("holding_rescaled"))
    else {
        return Err(format!("jumps header must contain run, entry_index, valley, holding_rescaled; got `{header}`"));
    };
    let (raw_c, cens_c) = (col("raw_holding_rescaled"), col("censored"));

    let mut logs: Vec<TraceJumpLog> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| format!("line {}: bad {what} in `{line}`", n + 2);
        let get = |c: usize| cells.get(c).copied().ok_or_else(|| bad("column count"));
        let run: u64 = get(run_c)?.parse().map_err(|_| bad("run"))?;
        let idx: usize = get(idx_c)?.parse().map_err(|_| bad("entry_index"))?;
        let valley: usize = get(val_c)?.parse().map_err(|_| bad("valley"))?;
        let holding: f64 = get(hold_c)?.parse().map_err(|_| bad("holding"))?;
        let raw_holding = match raw_c {
            Some(c) => get(c)?.parse().map_err(|_| bad("raw holding"))?,
            None => f64::NAN,
        };
        let censored = match cens_c {
            Some(c) => get(c)? == "1",
            None => false,
        };
        if logs.last().is_none_or(|l| l.run != run) {
            if logs.iter().any(|l| l.run == run) {
                return Err(bad("run order (runs must be contiguous)"));
            }
            let m = meta.iter().find(|m| m.run == run);
            logs.push(TraceJumpLog {
                run,
                entries: Vec::new(),
                delta_time: m.map_or(0.0, |m| m.delta_time),
                total_time: m.map_or(0.0, |m| m.total_time),
                steps: m.map_or(0, |m| m.steps),
                theta,
                dt,
                first_transition_raw: m.and_then(|m| m.first_transition_raw),
                censored: m.is_some_and(|m| m.censored),
            });
        }
        let log = logs.last_mut().expect("pushed above");
        if idx != log.entries.len() {
            return Err(bad("entry_index (entries must be in order)"));
        }
        log.entries.push(TraceEntry { valley, holding, censored, raw_holding });
    }
    if cens_c.is_none() {
        // without the column, the last entry of every run is the open one
        for l in &mut logs {
            if let Some(e) = l.entries.last_mut() {
                e.censored = true;
            }
        }
    }
    Ok(logs)
}
