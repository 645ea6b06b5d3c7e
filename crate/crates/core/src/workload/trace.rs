//! Line-oriented trace format.
//!
//! ```text
//! # stream header
//! S,<stream_id>,<arrival_time_s>,<duration_s>
//! # one row per GOP, one `type:mean:std` field per VM type
//! G,<stream_id>,<gop_index>,<rel_deadline_s>,<type_id>:<mean_s>:<std_s>,...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{
    EtcMatrix, ExecEstimate, GopId, StreamId, VideoStream, VmTypeCatalog, Workload, WorkloadError,
};

struct Header {
    arrival: f64,
    duration: f64,
}

struct GopRow {
    rel_deadline: f64,
    estimates: Vec<Option<ExecEstimate>>,
}

pub fn load_trace(path: impl AsRef<Path>, catalog: &VmTypeCatalog) -> Result<Workload, WorkloadError> {
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text, catalog)
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64, WorkloadError> {
    let v: f64 = field.trim().parse().map_err(|_| WorkloadError::Parse {
        line,
        msg: format!("invalid {what} `{}`", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(WorkloadError::Parse {
            line,
            msg: format!("{what} must be finite"),
        });
    }
    Ok(v)
}

fn parse_stream_id(field: &str, line: usize) -> Result<StreamId, WorkloadError> {
    field
        .trim()
        .parse()
        .map(StreamId)
        .map_err(|_| WorkloadError::Parse {
            line,
            msg: format!("invalid stream id `{}`", field.trim()),
        })
}

pub fn parse_trace(text: &str, catalog: &VmTypeCatalog) -> Result<Workload, WorkloadError> {
    let mut headers: BTreeMap<StreamId, Header> = BTreeMap::new();
    let mut rows: BTreeMap<GopId, GopRow> = BTreeMap::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        match fields[0] {
            "S" => {
                if fields.len() != 4 {
                    return Err(WorkloadError::Parse {
                        line,
                        msg: format!("stream header needs 4 fields, found {}", fields.len()),
                    });
                }
                let id = parse_stream_id(fields[1], line)?;
                let arrival = parse_f64(fields[2], line, "arrival time")?;
                let duration = parse_f64(fields[3], line, "duration")?;
                if arrival < 0.0 || duration < 0.0 {
                    return Err(WorkloadError::Parse {
                        line,
                        msg: "arrival time and duration must be non-negative".into(),
                    });
                }
                if headers.insert(id, Header { arrival, duration }).is_some() {
                    return Err(WorkloadError::Parse {
                        line,
                        msg: format!("duplicate header for stream {id}"),
                    });
                }
            }
            "G" => {
                if fields.len() < 4 {
                    return Err(WorkloadError::Parse {
                        line,
                        msg: "GOP row needs at least 4 fields".into(),
                    });
                }
                let stream = parse_stream_id(fields[1], line)?;
                let index: u32 = fields[2].parse().map_err(|_| WorkloadError::Parse {
                    line,
                    msg: format!("invalid GOP index `{}`", fields[2]),
                })?;
                let rel_deadline = parse_f64(fields[3], line, "relative deadline")?;
                let mut estimates = vec![None; catalog.len()];
                for entry in &fields[4..] {
                    let parts: Vec<&str> = entry.split(':').collect();
                    if parts.len() != 3 {
                        return Err(WorkloadError::Parse {
                            line,
                            msg: format!("ETC field `{entry}` is not type:mean:std"),
                        });
                    }
                    let type_idx = catalog
                        .position(parts[0])
                        .ok_or_else(|| WorkloadError::UnknownType(parts[0].to_string()))?;
                    let mean = parse_f64(parts[1], line, "mean")?;
                    let std = parse_f64(parts[2], line, "std dev")?;
                    let est = ExecEstimate::new(mean, std).map_err(|e| WorkloadError::Parse {
                        line,
                        msg: e.to_string(),
                    })?;
                    if estimates[type_idx].replace(est).is_some() {
                        return Err(WorkloadError::Parse {
                            line,
                            msg: format!("type `{}` listed twice", parts[0]),
                        });
                    }
                }
                let id = GopId { stream, index };
                if rows
                    .insert(
                        id,
                        GopRow {
                            rel_deadline,
                            estimates,
                        },
                    )
                    .is_some()
                {
                    return Err(WorkloadError::Parse {
                        line,
                        msg: format!("duplicate row for {id}"),
                    });
                }
            }
            other => {
                return Err(WorkloadError::Parse {
                    line,
                    msg: format!("unknown record kind `{other}`"),
                })
            }
        }
    }

    let mut etc = EtcMatrix::new(catalog.len());
    let mut per_stream: BTreeMap<StreamId, Vec<f64>> = BTreeMap::new();
    for (id, row) in rows {
        if !headers.contains_key(&id.stream) {
            return Err(WorkloadError::Validation(format!(
                "{id} references stream {} with no header",
                id.stream
            )));
        }
        let mut full = Vec::with_capacity(catalog.len());
        for (t, e) in row.estimates.into_iter().enumerate() {
            match e {
                Some(e) => full.push(e),
                None => {
                    return Err(WorkloadError::MissingEntry {
                        gop: id,
                        type_id: catalog.get(t).map(|d| d.type_id.clone()).unwrap_or_default(),
                    })
                }
            }
        }
        etc.insert_row(id, full)?;
        let deadlines = per_stream.entry(id.stream).or_default();
        if deadlines.len() != id.index as usize {
            return Err(WorkloadError::Validation(format!(
                "stream {} is missing GOP {}",
                id.stream,
                deadlines.len()
            )));
        }
        deadlines.push(row.rel_deadline);
    }

    let mut streams: Vec<VideoStream> = headers
        .into_iter()
        .map(|(id, h)| {
            let deadlines = per_stream.remove(&id).unwrap_or_default();
            VideoStream::new(id, h.arrival, h.duration, &deadlines)
        })
        .collect();
    streams.sort_by(|a, b| {
        a.request_arrival_time
            .total_cmp(&b.request_arrival_time)
            .then(a.id.cmp(&b.id))
    });
    let workload = Workload { streams, etc };
    workload.validate(catalog)?;
    Ok(workload)
}

/// Serialize a workload in the trace format accepted by [`parse_trace`].
pub fn write_trace(workload: &Workload, catalog: &VmTypeCatalog) -> Result<String, WorkloadError> {
    let mut out = String::new();
    for s in &workload.streams {
        writeln!(out, "S,{},{},{}", s.id, s.request_arrival_time, s.duration).unwrap();
    }
    for s in &workload.streams {
        for g in &s.gops {
            write!(out, "G,{},{},{}", s.id, g.id.index, g.relative_deadline).unwrap();
            for (t, desc) in catalog.iter().enumerate() {
                let e = workload.etc.get(g.id, t)?;
                write!(out, ",{}:{}:{}", desc.type_id, e.mean, e.std_dev).unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}
