//! CSV import/export of point sets, trees and every experiment artifact.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the exact `f64` values. Column layouts:
//!
//! | artifact      | columns                                                   |
//! |---------------|-----------------------------------------------------------|
//! | points        | `id,x1,…,xd`                                              |
//! | tree          | `child_id,parent_id` (`0` is the origin)                  |
//! | straightness  | `vertex_id,norm,max_angle`                                |
//! | crossings     | `edge_a_child,edge_b_child`                               |
//! | trace         | `n,x1,…,xd,R,r,L,is_tau,is_Q,is_w,theta`                  |
//! | renewals      | `block,w_start,w_end,block_length,perp1,…,perpd`          |
//! | tail          | `threshold,survival,half_width,bound`                     |
//!
//! Flags in the trace are `0`/`1`. `is_tau` marks every good step
//! (including `τ_0 = 0` and `Θ`), `is_Q` marks a good step `τ_k < Θ` whose
//! event `Q_{τ_k+1}` occurred, `is_w` marks every distinct renewal time
//! (including `w_0 = 0` and `Θ`) and `theta` marks the row `n = Θ`.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::exploration::{Exploration, RenewalBlock};
use crate::geom::Vector;
use crate::ppp::PointSet;
use crate::stats::TailEstimate;
use crate::tree::{Parent, RstTree, StraightnessProfile, ORIGIN_ID};

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, msg: format!("{other:?}") },
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn axis_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (1..=dim).map(move |i| format!("{prefix}{i}"))
}

pub fn write_points<W: Write>(w: W, points: &PointSet) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> =
        std::iter::once("id".to_string()).chain(axis_header("x", points.dim())).collect();
    out.write_record(&header).map_err(csv_error)?;
    for (id, p) in points.iter() {
        let row: Vec<String> =
            std::iter::once(id.to_string()).chain(p.coords().iter().map(f64::to_string)).collect();
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_points<R: Read>(r: R) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let dim = header.len().saturating_sub(1);
    if header.get(0) != Some("id") || dim == 0 {
        return Err(Error::Parse { line: 1, msg: "expected header id,x1,...,xd".into() });
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("x{}", i + 1) {
            return Err(Error::Parse { line: 1, msg: format!("unexpected column {name:?}") });
        }
    }
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |msg: String| Error::Parse { line, msg };
        let id: u64 = rec[0].parse().map_err(|e| parse_err(format!("bad id: {e}")))?;
        let coords = (1..=dim)
            .map(|i| rec[i].parse::<f64>().map_err(|e| parse_err(format!("bad coordinate: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        points.push(Vector::new(coords).map_err(|e| parse_err(e.to_string()))?);
    }
    PointSet::with_ids(dim, points, ids)
}

pub fn write_tree<W: Write>(w: W, tree: &RstTree) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["child_id", "parent_id"]).map_err(csv_error)?;
    for (c, p) in tree.edges() {
        out.write_record([c.to_string(), p.to_string()]).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `child_id,parent_id` rows and attaches them to `points`.
pub fn read_tree<R: Read>(r: R, points: PointSet) -> Result<RstTree> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["child_id", "parent_id"] {
        return Err(Error::Parse { line: 1, msg: "expected header child_id,parent_id".into() });
    }
    let index: HashMap<u64, usize> = points.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<Option<Parent>> = vec![None; points.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse = |s: &str| -> Result<u64> {
            s.parse().map_err(|e| Error::Parse { line, msg: format!("bad id {s:?}: {e}") })
        };
        let (c, p) = (parse(&rec[0])?, parse(&rec[1])?);
        let ci = *index.get(&c).ok_or(Error::Parse { line, msg: format!("unknown child {c}") })?;
        let pv = if p == ORIGIN_ID {
            Parent::Origin
        } else {
            Parent::Vertex(
                *index.get(&p).ok_or(Error::Parse { line, msg: format!("unknown parent {p}") })?,
            )
        };
        if parent[ci].replace(pv).is_some() {
            return Err(Error::Parse { line, msg: format!("child {c} listed twice") });
        }
    }
    let parent = parent
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| invalid(format!("vertex {} has no edge", points.ids()[i]))))
        .collect::<Result<Vec<_>>>()?;
    RstTree::from_parents(points, parent)
}

pub fn write_straightness<W: Write>(w: W, profile: &StraightnessProfile) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["vertex_id", "norm", "max_angle"]).map_err(csv_error)?;
    for r in &profile.records {
        out.write_record([r.vertex_id.to_string(), r.norm.to_string(), r.max_angle.to_string()])
            .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_crossings<W: Write>(w: W, crossings: &[(u64, u64)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["edge_a_child", "edge_b_child"]).map_err(csv_error)?;
    for (a, b) in crossings {
        out.write_record([a.to_string(), b.to_string()]).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, run: &Exploration) -> Result<()> {
    let mut out = writer(w);
    let dim = run.dim();
    let header: Vec<String> = std::iter::once("n".to_string())
        .chain(axis_header("x", dim))
        .chain(["R", "r", "L", "is_tau", "is_Q", "is_w", "theta"].map(String::from))
        .collect();
    out.write_record(&header).map_err(csv_error)?;
    let t = &run.trace;
    for (n, (p, s)) in run.path.iter().zip(&run.stats).enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(p.coords().iter().map(f64::to_string));
        row.extend([s.radius, s.reach, s.width].map(|v| v.to_string()));
        row.extend(
            [t.is_tau(n), t.is_q(n), t.is_w(n), n == t.theta].map(|b| flag(b).to_string()),
        );
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_renewals<W: Write>(w: W, dim: usize, blocks: &[RenewalBlock]) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = ["block", "w_start", "w_end", "block_length"]
        .map(String::from)
        .into_iter()
        .chain(axis_header("perp", dim))
        .collect();
    out.write_record(&header).map_err(csv_error)?;
    for b in blocks {
        let mut row = vec![
            b.block.to_string(),
            b.w_start.to_string(),
            b.w_end.to_string(),
            b.length.to_string(),
        ];
        row.extend(b.perp.coords().iter().map(f64::to_string));
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Tail estimate with an optional analytic bound column (empty when absent).
pub fn write_tail<W: Write>(w: W, est: &TailEstimate, bound: Option<&[f64]>) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["threshold", "survival", "half_width", "bound"]).map_err(csv_error)?;
    for i in 0..est.thresholds.len() {
        let b = bound.and_then(|b| b.get(i)).map(f64::to_string).unwrap_or_default();
        out.write_record([
            est.thresholds[i].to_string(),
            est.survival[i].to_string(),
            est.half_width[i].to_string(),
            b,
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes arbitrary rows under a header; used for per-trial summaries.
pub fn write_rows<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(invalid("row width differs from header"));
        }
        out.write_record(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::{explore, renewal_increments, Constants};
    use crate::tree::{build_rst, straightness_profile};

    #[test]
    fn points_round_trip_exactly() {
        let pts = crate::ppp::sample_ball(3, 4.0, 12).unwrap();
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("id,x1,x2,x3\n"));
        assert_eq!(read_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn tree_round_trip() {
        let pts = crate::ppp::sample_ball(2, 6.0, 3).unwrap();
        let tree = build_rst(&pts);
        let mut buf = Vec::new();
        write_tree(&mut buf, &tree).unwrap();
        assert_eq!(read_tree(buf.as_slice(), pts).unwrap(), tree);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let err = read_points("id,x1,x2\n1,0.5,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(read_points("name,x1\n".as_bytes()).is_err());
        let pts = PointSet::new(2, vec![[1.0, 0.0].into()]).unwrap();
        assert!(read_tree("child_id,parent_id\n1,9\n".as_bytes(), pts.clone()).is_err());
        assert!(read_tree("child_id,parent_id\n".as_bytes(), pts).is_err());
    }

    #[test]
    fn trace_and_renewal_headers() {
        let pts = crate::ppp::sample_ball(2, 10.0, 1).unwrap();
        let run = explore(&[10.0, 0.0].into(), &pts.index(), &Constants::for_dim(2)).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &run).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,x1,x2,R,r,L,is_tau,is_Q,is_w,theta"));
        assert_eq!(text.lines().count(), run.path.len() + 1);
        let theta_rows = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
        assert_eq!(theta_rows, 1);
        let mut buf = Vec::new();
        write_renewals(&mut buf, 2, &renewal_increments(&run)).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("block,w_start,w_end,block_length,perp1,perp2\n"));
    }

    #[test]
    fn straightness_and_crossings_headers() {
        let pts = PointSet::new(2, vec![[2.0, 0.0].into(), [2.0, 1.0].into()]).unwrap();
        let prof = straightness_profile(&build_rst(&pts));
        let mut buf = Vec::new();
        write_straightness(&mut buf, &prof).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("vertex_id,norm,max_angle"));
        assert_eq!(text.lines().nth(2), Some("2,2.23606797749979,0"));
        let mut buf = Vec::new();
        write_crossings(&mut buf, &[(3, 4)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "edge_a_child,edge_b_child\n3,4\n");
    }
}
