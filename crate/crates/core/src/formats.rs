//! Comma-separated text formats for detections, trajectories, reports and
//! graph dumps.
//!
//! Every file starts with a header row. Detection files name their columns
//! `frame,x[,y],f1..fN,c1..cN`; the header fixes the position dimension and
//! the feature count. Ground truth and trajectories use
//! `frame,target_id,x[,y]` and `track_id,frame,x[,y]`. Rows of one track may
//! appear in any order; they are sorted by frame on reading.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::eval::{MotEvent, MotReport};
use crate::graph::TrackletGraph;
use crate::track::{Track, TrackPoint};

/// Position dimension and feature count of a detection file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionLayout {
    pub dims: usize,
    pub features: usize,
}

impl DetectionLayout {
    pub fn of(detections: &[Detection]) -> Result<Self> {
        let first = detections
            .first()
            .ok_or_else(|| Error::Detection("cannot infer a layout from no detections".into()))?;
        Ok(DetectionLayout {
            dims: first.position.len(),
            features: first.feature_count(),
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["frame".to_string(), "x".to_string()];
        if self.dims == 2 {
            h.push("y".into());
        }
        h.extend((1..=self.features).map(|i| format!("f{i}")));
        h.extend((1..=self.features).map(|i| format!("c{i}")));
        h
    }

    fn parse_header(h: &csv::StringRecord) -> Result<Self> {
        let cols: Vec<&str> = h.iter().map(str::trim).collect();
        let dims = match cols.as_slice() {
            ["frame", "x", "y", ..] => 2,
            ["frame", "x", ..] => 1,
            _ => return Err(Error::format(1, "detection header must start with frame,x")),
        };
        let rest = &cols[1 + dims..];
        if !rest.len().is_multiple_of(2) || rest.is_empty() {
            return Err(Error::format(1, "expected matching f1..fN and c1..cN columns"));
        }
        let n = rest.len() / 2;
        let expected = DetectionLayout { dims, features: n }.header();
        if cols != expected {
            return Err(Error::format(1, format!("expected header {}", expected.join(","))));
        }
        Ok(DetectionLayout { dims, features: n })
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::format(line_of(rec), format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| Error::format(line_of(rec), format!("cannot parse {name} from '{raw}'")))
}

fn finite(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    let v: f64 = field(rec, i, name)?;
    if !v.is_finite() {
        return Err(Error::format(line_of(rec), format!("{name} is not finite")));
    }
    Ok(v)
}

fn position_dims(h: &csv::StringRecord, lead: &[&str]) -> Result<usize> {
    let cols: Vec<&str> = h.iter().map(str::trim).collect();
    let n = lead.len();
    if cols.len() > n && cols[..n] == *lead && cols[n..] == ["x"] {
        Ok(1)
    } else if cols.len() > n && cols[..n] == *lead && cols[n..] == ["x", "y"] {
        Ok(2)
    } else {
        Err(Error::format(1, format!("expected header {},x[,y]", lead.join(","))))
    }
}

pub fn read_detections<R: Read>(input: R) -> Result<Vec<Detection>> {
    let mut rdr = reader(input);
    let layout = DetectionLayout::parse_header(rdr.headers()?)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let width = 1 + layout.dims + 2 * layout.features;
        if rec.len() != width {
            return Err(Error::format(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let frame = field(&rec, 0, "frame")?;
        let position = (0..layout.dims)
            .map(|d| finite(&rec, 1 + d, "position"))
            .collect::<Result<_>>()?;
        let base = 1 + layout.dims;
        let features = (0..layout.features)
            .map(|i| finite(&rec, base + i, "feature"))
            .collect::<Result<_>>()?;
        let confidences = (0..layout.features)
            .map(|i| finite(&rec, base + layout.features + i, "confidence"))
            .collect::<Result<_>>()?;
        let d = Detection::new(frame, position, features, confidences)
            .map_err(|e| Error::format(line, e.to_string()))?;
        out.push(d);
    }
    Ok(out)
}

pub fn write_detections<W: Write>(out: W, detections: &[Detection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if detections.is_empty() {
        w.write_record(["frame", "x", "f1", "c1"])?;
        w.flush()?;
        return Ok(());
    }
    let layout = DetectionLayout::of(detections)?;
    w.write_record(layout.header())?;
    for d in detections {
        if d.position.len() != layout.dims || d.feature_count() != layout.features {
            return Err(Error::Detection("detections do not share one layout".into()));
        }
        let mut rec = vec![d.frame.to_string()];
        rec.extend(d.position.iter().map(f64::to_string));
        rec.extend(d.features.iter().map(f64::to_string));
        rec.extend(d.confidences.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads tracks whose rows start with the two `lead` columns, the id first
/// when `id_first`.
fn read_tracks<R: Read>(input: R, lead: [&str; 2], id_first: bool) -> Result<Vec<Track>> {
    let mut rdr = reader(input);
    let dims = position_dims(rdr.headers()?, &lead)?;
    let mut tracks: BTreeMap<u64, Vec<TrackPoint>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 + dims {
            return Err(Error::format(
                line_of(&rec),
                format!("expected {} fields, found {}", 2 + dims, rec.len()),
            ));
        }
        let (id_col, frame_col) = if id_first { (0, 1) } else { (1, 0) };
        let id: u64 = field(&rec, id_col, lead[id_col])?;
        let frame: u32 = field(&rec, frame_col, "frame")?;
        let position = (0..dims).map(|d| finite(&rec, 2 + d, "position")).collect::<Result<_>>()?;
        tracks.entry(id).or_default().push(TrackPoint { frame, position });
    }
    tracks
        .into_iter()
        .map(|(id, mut points)| {
            points.sort_by_key(|p| p.frame);
            if let Some(w) = points.windows(2).find(|w| w[0].frame == w[1].frame) {
                return Err(Error::format(0, format!("track {id} has two points at frame {}", w[0].frame)));
            }
            Ok(Track { id, points })
        })
        .collect()
}

fn write_tracks<W: Write>(out: W, tracks: &[Track], lead: [&str; 2], id_first: bool) -> Result<()> {
    let dims = tracks
        .iter()
        .flat_map(|t| t.points.first())
        .map(|p| p.position.len())
        .next()
        .unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = lead.to_vec();
    header.extend(if dims == 2 { &["x", "y"][..] } else { &["x"][..] });
    w.write_record(&header)?;
    for t in tracks {
        for p in &t.points {
            if p.position.len() != dims {
                return Err(Error::Detection("track points do not share one dimension".into()));
            }
            let (a, b) = (t.id.to_string(), p.frame.to_string());
            let mut rec = if id_first { vec![a, b] } else { vec![b, a] };
            rec.extend(p.position.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Ground truth: `frame,target_id,x[,y]`.
pub fn read_ground_truth<R: Read>(input: R) -> Result<Vec<Track>> {
    read_tracks(input, ["frame", "target_id"], false)
}

pub fn write_ground_truth<W: Write>(out: W, tracks: &[Track]) -> Result<()> {
    write_tracks(out, tracks, ["frame", "target_id"], false)
}

/// Trajectories: `track_id,frame,x[,y]`.
pub fn read_trajectories<R: Read>(input: R) -> Result<Vec<Track>> {
    read_tracks(input, ["track_id", "frame"], true)
}

pub fn write_trajectories<W: Write>(out: W, tracks: &[Track]) -> Result<()> {
    write_tracks(out, tracks, ["track_id", "frame"], true)
}

pub fn write_report<W: Write>(out: W, report: &MotReport) -> Result<()> {
    write_rows(out, std::slice::from_ref(report))
}

/// Flat records, one CSV row each, with a header from the field names.
pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Event log: `event,frame,gt,hyp,from,to,distance`, empty where a field
/// does not apply.
pub fn write_events<W: Write>(out: W, events: &[MotEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["event", "frame", "gt", "hyp", "from", "to", "distance"])?;
    let s = |v: u64| v.to_string();
    for e in events {
        let rec: [String; 7] = match *e {
            MotEvent::Match { frame, gt, hyp, distance } => [
                "match".into(),
                frame.to_string(),
                s(gt),
                s(hyp),
                String::new(),
                String::new(),
                distance.to_string(),
            ],
            MotEvent::Miss { frame, gt } => {
                ["miss".into(), frame.to_string(), s(gt), "".into(), "".into(), "".into(), "".into()]
            }
            MotEvent::FalsePositive { frame, hyp } => [
                "false-positive".into(),
                frame.to_string(),
                String::new(),
                s(hyp),
                String::new(),
                String::new(),
                String::new(),
            ],
            MotEvent::Switch { frame, gt, from, to } => {
                ["switch".into(), frame.to_string(), s(gt), "".into(), s(from), s(to), "".into()]
            }
            MotEvent::Reinitialization { frame, gt, from, to } => [
                "reinitialization".into(),
                frame.to_string(),
                s(gt),
                String::new(),
                s(from),
                s(to),
                String::new(),
            ],
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Node table `id,t_start,t_end,len,inner_cost,mean1..N,mass1..N`.
pub fn write_graph_nodes<W: Write>(out: W, graph: &TrackletGraph) -> Result<()> {
    let n = graph.tracklets().next().map_or(0, |(_, t)| t.feature_count());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["id", "t_start", "t_end", "len", "inner_cost"].map(String::from).to_vec();
    header.extend((1..=n).map(|i| format!("mean{i}")));
    header.extend((1..=n).map(|i| format!("mass{i}")));
    w.write_record(&header)?;
    for (id, t) in graph.tracklets() {
        let mut rec = vec![
            id.to_string(),
            t.t_start().to_string(),
            t.t_end().to_string(),
            t.len().to_string(),
            t.inner_cost().to_string(),
        ];
        rec.extend(t.mean_features().iter().map(f64::to_string));
        rec.extend(t.conf_mass().iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Edge table `src,dst,weight`.
pub fn write_graph_edges<W: Write>(out: W, graph: &TrackletGraph) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "weight"])?;
    for (u, v, weight) in graph.edges() {
        w.write_record([u.to_string(), v.to_string(), weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
